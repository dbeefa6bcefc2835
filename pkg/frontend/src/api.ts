/** Typed client for the forecasting service.
 *
 * Every response arrives in the same envelope; `unwrap` peels it and turns
 * error envelopes into thrown `ServiceError`s so views only ever see data.
 * The fetch function is injectable so contract tests can replay recorded
 * payloads without a server.
 */

export interface Envelope<T> {
  api_version: string;
  status: "ok" | "error";
  data?: T;
  error?: { code: string; message: string };
}

export interface RecordDoc {
  series_id: string;
  issue_time: string;
  unit: string;
  model_id: string;
  level: number;
  mu: number[];
  sigma: number[];
  lower: number[];
  upper: number[];
}

export interface ForecastPayload {
  record: RecordDoc;
  model_id: string;
  theta: number;
}

export interface FlagDay {
  date: string;
  max_sigma: number | null;
  theta: number;
  sources: string[];
  note?: string;
}

export interface FlagsPayload {
  theta: number;
  start: string;
  end: string;
  days: FlagDay[];
}

export interface ThresholdEvent {
  theta: number;
  set_by: string;
  rationale: string;
  at: string;
}

export interface PolicyPayload {
  theta: number;
  set_by: string;
  history: ThresholdEvent[];
}

export interface MetricsRow {
  label: string;
  mse: number;
  rmse: number;
  mae: number;
  picp: number;
  sharpness: number;
  pinball: number | null;
  sample_count: number;
  unit: string;
  level: number;
}

export interface ComparisonPayload {
  rows: MetricsRow[];
  improvement?: {
    mse_pct: number;
    mae_pct: number;
    sharpness_pct: number;
    picp_pp: number;
  };
  cycle?: number;
  parent_model?: string;
  child_model?: string;
  eval_start?: string;
  eval_end?: string;
}

export interface CycleReportPayload {
  cycle: number;
  status: "retrained" | "no-op";
  theta: number;
  queried: number;
  acquired: number;
  unavailable: number;
  flagged_included: number;
  augmented_days: string[];
  parent_model: string;
  child_model: string;
  eval_start: string;
  eval_end: string;
  started_at: string;
  wall_time_s: number;
  metrics_before: Omit<MetricsRow, "label">;
  metrics_after: Omit<MetricsRow, "label">;
  notes: string[];
}

export interface JobPayload {
  id: string;
  kind: string;
  state: "queued" | "running" | "done" | "failed";
  submitted_at: string;
  progress: { epoch?: number; epoch_cap?: number } | null;
  result: Record<string, unknown> | null;
  error: string | null;
}

export interface CycleSummary {
  cycle: number;
  status: string;
  theta: number;
  queried: number;
  child_model: string;
  started_at: string;
}

export interface RareFlag {
  id: string;
  start: string;
  end: string;
  note: string;
  actor: string;
  created_at: string;
}

export interface ModelInfoPayload {
  model_id: string;
  cycles_run: number;
  training_days: number;
  hyperparams: Record<string, unknown>;
  provenance: Record<string, unknown>;
  best_epoch?: number;
  best_val_gnll?: number;
}

export interface SeriesSummary {
  start: string;
  end: string;
  hours: number;
  unit: string;
}

export interface DatasetPayload {
  series: Record<string, SeriesSummary>;
}

export class ServiceError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly httpStatus: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export async function unwrap<T>(resp: Response): Promise<T> {
  const doc = (await resp.json()) as Envelope<T>;
  if (doc.api_version !== "1") {
    throw new ServiceError("protocol", `unexpected api_version ${doc.api_version}`, resp.status);
  }
  if (doc.status === "error" || doc.error) {
    const err = doc.error ?? { code: "unknown", message: "no error detail" };
    throw new ServiceError(err.code, err.message, resp.status);
  }
  return doc.data as T;
}

export class Api {
  constructor(
    private readonly base = "/api/v1",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private get<T>(path: string, params?: Record<string, string>): Promise<T> {
    const qs = params ? `?${new URLSearchParams(params)}` : "";
    return this.fetchFn(`${this.base}${path}${qs}`).then((r) => unwrap<T>(r));
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.fetchFn(`${this.base}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    }).then((r) => unwrap<T>(r));
  }

  forecast(date: string, level?: number): Promise<ForecastPayload> {
    const params: Record<string, string> = { date };
    if (level !== undefined) params.level = String(level);
    return this.get("/forecast", params);
  }

  uncertaintyFlags(start: string, end: string): Promise<FlagsPayload> {
    return this.get("/uncertainty-flags", { start, end });
  }

  threshold(): Promise<PolicyPayload> {
    return this.get("/threshold");
  }

  setThreshold(theta: number, rationale: string, actor: string): Promise<PolicyPayload> {
    return this.post("/threshold", { theta, rationale, actor });
  }

  startCycle(): Promise<JobPayload> {
    return this.post("/al/cycle");
  }

  startTraining(): Promise<JobPayload> {
    return this.post("/train", {});
  }

  job(id: string): Promise<JobPayload> {
    return this.get(`/jobs/${id}`);
  }

  cycles(): Promise<{ cycles: CycleSummary[] }> {
    return this.get("/cycles");
  }

  cycle(index: number): Promise<CycleReportPayload> {
    return this.get(`/cycles/${index}`);
  }

  comparison(cycle: number): Promise<ComparisonPayload> {
    return this.get("/metrics/comparison", { cycle: String(cycle) });
  }

  rareFlags(): Promise<{ flags: RareFlag[] }> {
    return this.get("/rare-event-flags");
  }

  flagRareEvent(start: string, end: string, note: string, actor: string):
      Promise<{ flag: RareFlag; created: boolean; notice?: string }> {
    return this.post("/rare-event-flag", { start, end, note, actor });
  }

  modelInfo(): Promise<ModelInfoPayload> {
    return this.get("/model");
  }

  dataset(): Promise<DatasetPayload> {
    return this.get("/dataset");
  }

  generateSynthetic(nDays: number, seed: number): Promise<Record<string, unknown>> {
    return this.post("/dataset/synthetic", { n_days: nDays, seed });
  }
}
