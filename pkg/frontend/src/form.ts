import type { FormState } from "./state.js";

export interface FormView {
  root: HTMLElement;
  /** Write a value into an input (e.g. from a what-if click) and revalidate. */
  setValue(name: string, value: string): void;
  /** Anchor a server-side error message at its field. */
  showFieldError(name: string, message: string): void;
  refresh(): void;
}

/** One input per schema field, in schema order; inline validation. */
export function renderForm(
  container: HTMLElement,
  state: FormState,
  onChange: () => void,
): FormView {
  container.innerHTML = "";
  const inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();
  const errors = new Map<string, HTMLElement>();

  for (const field of state.fields) {
    const row = document.createElement("div");
    row.className = "field-row";
    row.dataset.field = field.name;

    const label = document.createElement("label");
    label.textContent = labelFor(field.name);
    label.htmlFor = `field-${field.name}`;

    let input: HTMLInputElement | HTMLSelectElement;
    if (field.kind === "numeric") {
      input = document.createElement("input");
      input.type = "number";
      input.min = String(field.min);
      input.max = String(field.max);
      input.step = "any";
      input.placeholder = `${field.min} – ${field.max}`;
    } else {
      input = document.createElement("select");
      for (const level of field.levels) {
        const option = document.createElement("option");
        option.value = level;
        option.textContent = level;
        input.appendChild(option);
      }
    }
    input.id = `field-${field.name}`;
    input.name = field.name;
    input.value = state.get(field.name).raw;
    input.addEventListener("input", () => {
      state.set(field.name, input.value);
      sync(field.name);
      onChange();
    });
    input.addEventListener("change", () => {
      state.set(field.name, input.value);
      sync(field.name);
      onChange();
    });

    const error = document.createElement("span");
    error.className = "field-error";
    error.id = `error-${field.name}`;

    row.append(label, input, error);
    container.appendChild(row);
    inputs.set(field.name, input);
    errors.set(field.name, error);
  }

  function sync(name: string): void {
    const fieldState = state.get(name);
    const errorEl = errors.get(name)!;
    // "required" on untouched fields would shout at a blank form
    errorEl.textContent =
      fieldState.error && fieldState.raw !== "" ? fieldState.error : "";
    inputs.get(name)!.classList.toggle("invalid", fieldState.error !== null && fieldState.raw !== "");
  }

  function refresh(): void {
    for (const name of inputs.keys()) sync(name);
  }

  return {
    root: container,
    setValue(name, value) {
      const input = inputs.get(name);
      if (!input) return;
      input.value = value;
      state.set(name, value);
      sync(name);
      onChange();
    },
    showFieldError(name, message) {
      state.setServerError(name, message);
      const errorEl = errors.get(name);
      if (errorEl) errorEl.textContent = message;
      inputs.get(name)?.classList.add("invalid");
      onChange();
    },
    refresh,
  };
}

function labelFor(name: string): string {
  return name.replace(/_/g, " ");
}
