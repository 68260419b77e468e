// End-to-end: the built UI (dist/) drives the real Python service over HTTP
// inside a browser DOM. Covers the acceptance loop: 75.0% headline from an
// intercept-only bundle, a monotone-decreasing what-if sweep on a
// negative-coefficient feature, and click-to-writeback re-prediction.

import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

const here = dirname(fileURLToPath(import.meta.url));
const PYTHON = process.env.PYTHON ?? "python3";

let workdir: string;
const servers: { proc: ChildProcess; base: string }[] = [];

async function startServer(bundle: string): Promise<string> {
  const proc = spawn(PYTHON, ["-u", "-m", "vbackit.cli", "serve", "--bundle", bundle, "--port", "0"]);
  const base = await new Promise<string>((resolve, reject) => {
    let buffer = "";
    const onData = (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/serving .* on (http:\/\/[\d.]+:\d+)/);
      if (match) resolve(match[1]);
    };
    proc.stdout.on("data", onData);
    proc.stderr.on("data", (c: Buffer) => (buffer += c.toString()));
    proc.on("exit", (code) => reject(new Error(`server exited ${code}: ${buffer}`)));
    setTimeout(() => reject(new Error(`server start timeout: ${buffer}`)), 60_000);
  });
  servers.push({ proc, base });
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${base}/healthz`);
      if (res.ok) return base;
    } catch {
      await sleep(100);
    }
  }
  throw new Error("server never became healthy");
}

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

async function waitFor<T>(probe: () => T | null | undefined | false, what: string, ms = 15_000): Promise<T> {
  const deadline = Date.now() + ms;
  for (;;) {
    const value = probe();
    if (value) return value;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await sleep(50);
  }
}

function loadShell(): void {
  const html = readFileSync(join(here, "..", "dist", "index.html"), "utf8");
  const body = html.match(/<body[^>]*>([\s\S]*)<\/body>/)![1]
    .replace(/<script[\s\S]*?<\/script>/g, "");
  document.body.innerHTML = body;
}

function setInput(id: string, value: string): void {
  const input = document.querySelector<HTMLInputElement>(`#${id}`)!;
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

function fillForm(): void {
  setInput("field-prepreg_bmi", "30");
  setInput("field-maternal_age", "31");
  setInput("field-tobacco_use", "no");
  setInput("field-census_region", "south");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "counsel-ui-"));
  const made = spawnSync(PYTHON, [join(here, "make_test_bundles.py"), workdir], {
    encoding: "utf8",
  });
  if (made.status !== 0) {
    throw new Error(`make_test_bundles failed: ${made.stderr}`);
  }
});

afterAll(() => {
  for (const { proc } of servers) proc.kill();
  rmSync(workdir, { recursive: true, force: true });
});

describe("counseling UI against the live service", () => {
  it("renders the schema-driven form and shows 75.0% for the intercept-only bundle", async () => {
    const base = await startServer(join(workdir, "intercept.vbmb"));
    loadShell();
    const { boot } = await import("../dist/main.js");
    await boot(document, base);

    // one input per schema field, in order
    const rows = document.querySelectorAll(".field-row");
    expect([...rows].map((r) => (r as HTMLElement).dataset.field)).toEqual([
      "prepreg_bmi", "maternal_age", "tobacco_use", "census_region",
    ]);

    // submit disabled until every field is valid
    const submit = document.querySelector<HTMLButtonElement>("#submit-button")!;
    expect(submit.disabled).toBe(true);
    fillForm();
    expect(submit.disabled).toBe(false);

    submit.click();
    await waitFor(
      () => document.querySelector("#probability-value")!.textContent === "75.0%",
      "headline probability 75.0%",
    );
    const headline = document.querySelector<HTMLElement>("#probability-value")!;
    expect(headline.textContent).toBe("75.0%");
    expect(headline.title).toContain("0.75");  // raw probability on hover
    expect(document.querySelector("#classification")!.textContent).toContain("VBAC");
  });

  it("client-side range validation blocks the request", async () => {
    const base = await startServer(join(workdir, "intercept.vbmb"));
    loadShell();
    const { boot } = await import("../dist/main.js");
    await boot(document, base);
    fillForm();
    setInput("field-prepreg_bmi", "9999");
    const submit = document.querySelector<HTMLButtonElement>("#submit-button")!;
    expect(submit.disabled).toBe(true);
    const error = document.querySelector("#error-prepreg_bmi")!;
    expect(error.textContent).toContain("between");
  });

  it("sweeps a negative-coefficient feature monotonically and closes the click loop", async () => {
    const base = await startServer(join(workdir, "negcoef.vbmb"));
    loadShell();
    const { boot } = await import("../dist/main.js");
    await boot(document, base);
    fillForm();
    document.querySelector<HTMLButtonElement>("#submit-button")!.click();
    await waitFor(
      () => document.querySelector("#probability-value")!.textContent !== "–",
      "initial prediction",
    );
    const before = document.querySelector("#probability-value")!.textContent!;

    // numeric sweep over the negative-coefficient feature
    const select = document.querySelector<HTMLSelectElement>("#whatif-field")!;
    select.value = "prepreg_bmi";
    select.dispatchEvent(new Event("change", { bubbles: true }));
    document.querySelector<HTMLButtonElement>("#whatif-run")!.click();
    const points = await waitFor(() => {
      const dots = document.querySelectorAll(".sweep-point");
      return dots.length === 20 ? [...dots] : null;
    }, "20 sweep points");

    const probs = points.map((p) => Number((p as SVGElement).dataset.probability));
    for (let i = 1; i < probs.length; i++) {
      expect(probs[i]).toBeLessThan(probs[i - 1]);  // strictly decreasing
    }

    // clicking a sweep point writes the value back and re-predicts
    const target = points[4] as SVGElement;
    const targetValue = target.dataset.value!;
    const targetProb = Number(target.dataset.probability);
    target.dispatchEvent(new MouseEvent("click", { bubbles: true }));

    await waitFor(
      () =>
        document.querySelector<HTMLInputElement>("#field-prepreg_bmi")!.value === targetValue,
      "form writeback",
    );
    await waitFor(
      () =>
        document.querySelector("#probability-value")!.textContent ===
        `${(targetProb * 100).toFixed(1)}%`,
      "headline updated to the clicked point",
    );
    expect(document.querySelector("#probability-value")!.textContent).not.toBe(before);
    // the clicked point is now highlighted as current
    expect(target.classList.contains("current")).toBe(true);
  });

  it("categorical sweep renders one bar per level", async () => {
    const base = await startServer(join(workdir, "negcoef.vbmb"));
    loadShell();
    const { boot } = await import("../dist/main.js");
    await boot(document, base);
    fillForm();
    document.querySelector<HTMLButtonElement>("#submit-button")!.click();
    await waitFor(
      () => document.querySelector("#probability-value")!.textContent !== "–",
      "initial prediction",
    );
    const select = document.querySelector<HTMLSelectElement>("#whatif-field")!;
    select.value = "census_region";
    select.dispatchEvent(new Event("change", { bubbles: true }));
    document.querySelector<HTMLButtonElement>("#whatif-run")!.click();
    const bars = await waitFor(() => {
      const els = document.querySelectorAll(".sweep-bar");
      return els.length > 0 ? [...els] : null;
    }, "sweep bars");
    expect(bars).toHaveLength(4); // midwest, northeast, south, west
  });

  it("surfaces a server 422 at the offending field", async () => {
    const base = await startServer(join(workdir, "intercept.vbmb"));
    loadShell();
    const { boot } = await import("../dist/main.js");
    const app = await boot(document, base);
    fillForm();
    // bypass client validation to force a server-side unseen level
    app.state.set("census_region", "atlantis");
    Object.defineProperty(app.state, "allValid", { value: () => true });
    await app.client.predict(app.state.payload()).catch((error) => {
      app.form.showFieldError("census_region", String(error.body.level));
    });
    expect(document.querySelector("#error-census_region")!.textContent).toContain("atlantis");
  });
});
