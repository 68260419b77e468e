import { ApiClient, ApiError, formatPercent, numericGrid } from "./api.js";
import type { Metadata, SchemaField } from "./api.js";
import { FormState } from "./state.js";
import { renderForm } from "./form.js";
import type { FormView } from "./form.js";
import { renderSweep } from "./whatif.js";
import type { SweepView } from "./whatif.js";

interface Elements {
  banner: HTMLElement;
  form: HTMLElement;
  submit: HTMLButtonElement;
  probability: HTMLElement;
  classification: HTMLElement;
  modelInfo: HTMLElement;
  whatifSection: HTMLElement;
  fieldSelect: HTMLSelectElement;
  sweepButton: HTMLButtonElement;
  chart: HTMLElement;
}

function grab(root: Document | HTMLElement): Elements {
  const byId = (id: string) => {
    const el = root.querySelector(`#${id}`);
    if (!el) throw new Error(`missing element #${id}`);
    return el as HTMLElement;
  };
  return {
    banner: byId("banner"),
    form: byId("predictor-form"),
    submit: byId("submit-button") as HTMLButtonElement,
    probability: byId("probability-value"),
    classification: byId("classification"),
    modelInfo: byId("model-info"),
    whatifSection: byId("whatif-section"),
    fieldSelect: byId("whatif-field") as HTMLSelectElement,
    sweepButton: byId("whatif-run") as HTMLButtonElement,
    chart: byId("whatif-chart"),
  };
}

export interface App {
  client: ApiClient;
  state: FormState;
  form: FormView;
}

/** Wire the page against a service; resolves once the form is rendered. */
export async function boot(root: Document | HTMLElement, baseUrl: string): Promise<App> {
  const el = grab(root);
  const client = new ApiClient(baseUrl);

  let metadata: Metadata;
  try {
    metadata = await client.metadata();
    el.banner.hidden = true;
    el.banner.textContent = "";
  } catch (error) {
    el.banner.hidden = false;
    el.banner.textContent = "Could not load the model schema.";
    const retry = document.createElement("button");
    retry.textContent = "Retry";
    retry.addEventListener("click", () => void boot(root, baseUrl));
    el.banner.appendChild(retry);
    throw error;
  }

  const state = new FormState(metadata.fields);
  let sweepView: SweepView | null = null;
  let sweptField: SchemaField | null = null;

  const onChange = () => {
    el.submit.disabled = !state.allValid();
  };
  const form = renderForm(el.form, state, onChange);
  onChange();

  // what-if selector: every schema field with a sweepable domain
  el.fieldSelect.innerHTML = "";
  for (const field of metadata.fields) {
    if (field.kind === "categorical" && field.levels.length < 2) continue;
    const option = document.createElement("option");
    option.value = field.name;
    option.textContent = field.name.replace(/_/g, " ");
    el.fieldSelect.appendChild(option);
  }

  function clearServerErrors(): void {
    form.refresh();
  }

  function surfaceError(error: unknown): void {
    if (error instanceof DOMException && error.name === "AbortError") return;
    if (error instanceof ApiError && error.body.field) {
      const detail =
        error.body.error === "unseen_level"
          ? `level ${error.body.level} not known; allowed: ${(error.body.allowed ?? []).join(", ")}`
          : (error.body.message ?? error.body.error);
      form.showFieldError(error.body.field, detail);
      return;
    }
    el.banner.hidden = false;
    el.banner.textContent =
      error instanceof ApiError
        ? `Server error: ${error.body.message ?? error.body.error}`
        : "Network failure; your inputs are preserved.";
  }

  async function predict(): Promise<void> {
    clearServerErrors();
    el.banner.hidden = true;
    try {
      const result = await client.predict(state.payload());
      el.probability.textContent = formatPercent(result.probability);
      el.probability.title = `raw probability ${result.probability}`;
      el.probability.dataset.probability = String(result.probability);
      el.classification.textContent =
        result.predicted_class === 1
          ? `Likely successful VBAC (>= ${formatPercent(result.threshold)} threshold)`
          : `Likely repeat cesarean (< ${formatPercent(result.threshold)} threshold)`;
      el.modelInfo.textContent = `model: ${result.model.family}` +
        (result.model.config_hash ? ` (${result.model.config_hash})` : "");
      el.whatifSection.hidden = false;
    } catch (error) {
      surfaceError(error);
    }
  }

  async function runSweep(): Promise<void> {
    const field = metadata.fields.find((f) => f.name === el.fieldSelect.value);
    if (!field) return;
    const grid =
      field.kind === "numeric" ? numericGrid(field, 20) : [...field.levels];
    try {
      const sweep = await client.whatif(state.payload(), field.name, grid);
      sweptField = field;
      sweepView = renderSweep(
        el.chart,
        field,
        sweep.results,
        currentValueOf(field),
        (value) => {
          form.setValue(field.name, String(value));
          sweepView?.markCurrent(value);
          void predict();
        },
      );
    } catch (error) {
      surfaceError(error);
    }
  }

  function currentValueOf(field: SchemaField): number | string {
    const raw = state.get(field.name).raw;
    return field.kind === "numeric" ? Number(raw) : raw;
  }

  el.submit.addEventListener("click", (event) => {
    event.preventDefault();
    void predict();
  });
  el.sweepButton.addEventListener("click", (event) => {
    event.preventDefault();
    void runSweep();
  });
  el.fieldSelect.addEventListener("change", () => {
    if (sweptField && !el.whatifSection.hidden) void runSweep();
  });

  return { client, state, form };
}

declare global {
  interface Window {
    counselBoot?: typeof boot;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.counselBoot = boot;
  const auto = document.querySelector("[data-autoboot]");
  if (auto) {
    void boot(document, "");
  }
}
