import type { SchemaField } from "./api.js";

export interface FieldState {
  raw: string;
  error: string | null;
}

/** Session-only form state: values live here and nowhere else. */
export class FormState {
  private states = new Map<string, FieldState>();

  constructor(readonly fields: SchemaField[]) {
    for (const field of fields) {
      const initial = field.kind === "categorical" ? field.levels[0] : "";
      this.states.set(field.name, { raw: initial, error: initial ? null : "required" });
    }
  }

  set(name: string, raw: string): void {
    const field = this.fields.find((f) => f.name === name);
    if (!field) return;
    this.states.set(name, { raw, error: validate(field, raw) });
  }

  setServerError(name: string, message: string): void {
    const state = this.states.get(name);
    if (state) state.error = message;
  }

  get(name: string): FieldState {
    return this.states.get(name) ?? { raw: "", error: "unknown field" };
  }

  allValid(): boolean {
    return [...this.states.values()].every((s) => s.error === null);
  }

  /** Values exactly as they will be sent: numbers for numeric fields. */
  payload(): Record<string, number | string> {
    const out: Record<string, number | string> = {};
    for (const field of this.fields) {
      const raw = this.states.get(field.name)!.raw;
      out[field.name] = field.kind === "numeric" ? Number(raw) : raw;
    }
    return out;
  }
}

export function validate(field: SchemaField, raw: string): string | null {
  if (raw.trim() === "") return "required";
  if (field.kind === "numeric") {
    const value = Number(raw);
    if (!Number.isFinite(value)) return "must be a number";
    if (value < field.min || value > field.max) {
      return `must be between ${field.min} and ${field.max}`;
    }
    return null;
  }
  return field.levels.includes(raw) ? null : "not an allowed value";
}
