// Typed client for the prediction service. Every number shown in the UI
// comes from these three endpoints; nothing is computed client-side.

export interface NumericField {
  name: string;
  kind: "numeric";
  min: number;
  max: number;
}

export interface CategoricalField {
  name: string;
  kind: "categorical";
  levels: string[];
}

export type SchemaField = NumericField | CategoricalField;

export interface Metadata {
  family: string;
  threshold: number;
  fields: SchemaField[];
  training: Record<string, unknown>;
}

export interface Prediction {
  probability: number;
  predicted_class: number;
  threshold: number;
  model: { family: string; config_hash?: string | null };
}

export interface SweepPoint {
  value: number | string;
  probability: number;
}

export interface SweepResult {
  field: string;
  kind: string;
  results: SweepPoint[];
}

export interface ErrorBody {
  error: string;
  message?: string;
  field?: string;
  level?: string;
  allowed?: string[];
  min?: number;
  max?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ErrorBody,
  ) {
    super(body.message ?? body.error);
  }
}

/** In-flight requests on the same channel are superseded: latest wins. */
export class ApiClient {
  private controllers = new Map<string, AbortController>();

  constructor(readonly baseUrl: string) {}

  private async request<T>(
    channel: string,
    path: string,
    payload?: unknown,
  ): Promise<T> {
    this.controllers.get(channel)?.abort();
    const controller = new AbortController();
    this.controllers.set(channel, controller);
    const response = await fetch(this.baseUrl + path, {
      method: payload === undefined ? "GET" : "POST",
      headers: { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
      signal: controller.signal,
    });
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body as ErrorBody);
    }
    return body as T;
  }

  metadata(): Promise<Metadata> {
    return this.request<Metadata>("metadata", "/metadata");
  }

  predict(fields: Record<string, number | string>): Promise<Prediction> {
    return this.request<Prediction>("predict", "/predict", { fields });
  }

  whatif(
    fields: Record<string, number | string>,
    field: string,
    grid: Array<number | string>,
  ): Promise<SweepResult> {
    return this.request<SweepResult>("whatif", "/whatif", { fields, field, grid });
  }
}

/** Numeric sweep grid: evenly spaced points across the schema range. */
export function numericGrid(field: NumericField, points = 20): number[] {
  const step = (field.max - field.min) / (points - 1);
  const grid: number[] = [];
  for (let i = 0; i < points; i++) {
    grid.push(round6(field.min + i * step));
  }
  return grid;
}

function round6(x: number): number {
  return Math.round(x * 1e6) / 1e6;
}

export function formatPercent(probability: number): string {
  return `${(probability * 100).toFixed(1)}%`;
}
