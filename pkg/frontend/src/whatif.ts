import type { SchemaField, SweepPoint } from "./api.js";
import { formatPercent } from "./api.js";

const WIDTH = 560;
const HEIGHT = 240;
const PAD = { left: 52, right: 16, top: 16, bottom: 42 };
const SVG_NS = "http://www.w3.org/2000/svg";

export interface SweepView {
  /** Re-highlight after the form value changes without refetching. */
  markCurrent(value: number | string): void;
}

/**
 * Line chart (numeric) or bar chart (categorical) of probability vs the
 * swept value. The point matching the current form value is highlighted;
 * clicking any point hands its value to `onPick` (the feedback loop).
 */
export function renderSweep(
  container: HTMLElement,
  field: SchemaField,
  points: SweepPoint[],
  currentValue: number | string,
  onPick: (value: number | string) => void,
): SweepView {
  container.innerHTML = "";
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("width", "100%");
  svg.setAttribute("data-testid", "sweep-chart");
  container.appendChild(svg);

  const plotW = WIDTH - PAD.left - PAD.right;
  const plotH = HEIGHT - PAD.top - PAD.bottom;
  const probs = points.map((p) => p.probability);
  const lo = Math.max(0, Math.min(...probs) - 0.05);
  const hi = Math.min(1, Math.max(...probs) + 0.05);
  const yOf = (p: number) => PAD.top + plotH * (1 - (p - lo) / (hi - lo || 1));

  // axes and y ticks
  for (const tick of [lo, (lo + hi) / 2, hi]) {
    const y = yOf(tick);
    svg.appendChild(line(PAD.left, y, WIDTH - PAD.right, y, "axis-grid"));
    const label = text(PAD.left - 6, y + 4, formatPercent(tick));
    label.setAttribute("text-anchor", "end");
    label.setAttribute("class", "axis-label");
    svg.appendChild(label);
  }

  const markers: { el: SVGElement; value: number | string }[] = [];

  if (field.kind === "numeric") {
    const values = points.map((p) => Number(p.value));
    const xLo = Math.min(...values);
    const xHi = Math.max(...values);
    const xOf = (v: number) => PAD.left + plotW * ((v - xLo) / (xHi - xLo || 1));

    const path = document.createElementNS(SVG_NS, "path");
    path.setAttribute(
      "d",
      points
        .map((p, i) => `${i ? "L" : "M"}${xOf(Number(p.value))},${yOf(p.probability)}`)
        .join(" "),
    );
    path.setAttribute("class", "sweep-line");
    svg.appendChild(path);

    for (const p of points) {
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(xOf(Number(p.value))));
      dot.setAttribute("cy", String(yOf(p.probability)));
      dot.setAttribute("r", "5");
      dot.setAttribute("class", "sweep-point");
      dot.setAttribute("data-value", String(p.value));
      dot.setAttribute("data-probability", String(p.probability));
      attachPick(dot, p, onPick);
      svg.appendChild(dot);
      markers.push({ el: dot, value: p.value });
    }
    for (const v of [xLo, (xLo + xHi) / 2, xHi]) {
      const label = text(xOf(v), HEIGHT - PAD.bottom + 18, trim(v));
      label.setAttribute("text-anchor", "middle");
      label.setAttribute("class", "axis-label");
      svg.appendChild(label);
    }
  } else {
    const band = plotW / points.length;
    points.forEach((p, i) => {
      const x = PAD.left + i * band + band * 0.15;
      const y = yOf(p.probability);
      const bar = document.createElementNS(SVG_NS, "rect");
      bar.setAttribute("x", String(x));
      bar.setAttribute("y", String(y));
      bar.setAttribute("width", String(band * 0.7));
      bar.setAttribute("height", String(PAD.top + plotH - y));
      bar.setAttribute("class", "sweep-bar");
      bar.setAttribute("data-value", String(p.value));
      bar.setAttribute("data-probability", String(p.probability));
      attachPick(bar, p, onPick);
      svg.appendChild(bar);
      markers.push({ el: bar, value: p.value });

      const label = text(x + band * 0.35, HEIGHT - PAD.bottom + 18, String(p.value));
      label.setAttribute("text-anchor", "middle");
      label.setAttribute("class", "axis-label");
      svg.appendChild(label);
    });
  }

  const view: SweepView = {
    markCurrent(value) {
      for (const m of markers) {
        m.el.classList.toggle("current", sameValue(m.value, value, field.kind));
      }
    },
  };
  view.markCurrent(currentValue);
  return view;
}

function sameValue(a: number | string, b: number | string, kind: string): boolean {
  if (kind === "numeric") return Math.abs(Number(a) - Number(b)) < 1e-9;
  return String(a) === String(b);
}

function attachPick(el: SVGElement, point: SweepPoint, onPick: (v: number | string) => void): void {
  el.addEventListener("click", () => onPick(point.value));
  const title = document.createElementNS(SVG_NS, "title");
  title.textContent = `${point.value}: ${point.probability}`;
  el.appendChild(title);
}

function line(x1: number, y1: number, x2: number, y2: number, cls: string): SVGElement {
  const el = document.createElementNS(SVG_NS, "line");
  el.setAttribute("x1", String(x1));
  el.setAttribute("y1", String(y1));
  el.setAttribute("x2", String(x2));
  el.setAttribute("y2", String(y2));
  el.setAttribute("class", cls);
  return el;
}

function text(x: number, y: number, content: string): SVGTextElement {
  const el = document.createElementNS(SVG_NS, "text");
  el.setAttribute("x", String(x));
  el.setAttribute("y", String(y));
  el.textContent = content;
  return el;
}

function trim(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(1);
}
