/** Pure payload-to-view transforms.
 *
 * The console never recomputes statistics: every number below is selected
 * from a service payload field and at most reordered or formatted. The
 * contract tests replay recorded payloads through these functions and
 * assert the outputs are verbatim payload values.
 */
import type {
  ComparisonPayload,
  CycleReportPayload,
  FlagDay,
  ForecastPayload,
  JobPayload,
  MetricsRow,
  PolicyPayload,
} from "./api.js";

export interface HourPoint {
  hour: number;          // 0..23 within the forecast day
  timestamp: string;     // RFC 3339, issue_time + hour
  mu: number;
  sigma: number;
  lower: number;
  upper: number;
  band: boolean;         // band is drawable only when lower < upper
}

export interface ForecastView {
  date: string;          // issue_time of the day
  unit: string;
  level: number;
  modelId: string;
  theta: number;
  points: HourPoint[];
  maxSigma: number;      // largest payload sigma, used for the day highlight
  highlighted: boolean;  // max sigma exceeded theta at render time
}

function addHours(iso: string, hours: number): string {
  const t = new Date(iso);
  t.setUTCHours(t.getUTCHours() + hours);
  return t.toISOString().replace(".000Z", "Z");
}

export function buildForecastView(payload: ForecastPayload): ForecastView {
  const rec = payload.record;
  const n = rec.mu.length;
  if (rec.sigma.length !== n || rec.lower.length !== n || rec.upper.length !== n) {
    throw new Error("forecast record arrays disagree in length");
  }
  const points: HourPoint[] = [];
  for (let h = 0; h < n; h++) {
    const lower = rec.lower[h]!;
    const upper = rec.upper[h]!;
    points.push({
      hour: h,
      timestamp: addHours(rec.issue_time, h),
      mu: rec.mu[h]!,
      sigma: rec.sigma[h]!,
      lower,
      upper,
      band: lower < upper,
    });
  }
  let maxSigma = -Infinity;
  for (const s of rec.sigma) maxSigma = Math.max(maxSigma, s);
  return {
    date: rec.issue_time,
    unit: rec.unit,
    level: rec.level,
    modelId: payload.model_id,
    theta: payload.theta,
    points,
    maxSigma,
    highlighted: maxSigma > payload.theta,
  };
}

/** Hover readout: the four payload numbers for one hour, unmodified. */
export function hoverReadout(p: HourPoint): string {
  return `mu=${p.mu} sigma=${p.sigma} L=${p.lower} U=${p.upper}`;
}

/** Days whose payload max sigma exceeds the candidate theta (slider preview).
 *
 * At the payload's own theta this reproduces the server's uncertainty list
 * exactly; operator-only days carry no sigma and never preview-highlight.
 */
export function previewHighlights(days: FlagDay[], theta: number): string[] {
  return days
    .filter((d) => d.max_sigma !== null && d.max_sigma > theta)
    .map((d) => d.date);
}

export function operatorFlaggedDays(days: FlagDay[]): string[] {
  return days.filter((d) => d.sources.includes("operator-flagged")).map((d) => d.date);
}

export interface ComparisonCell {
  key: keyof Omit<MetricsRow, "label" | "unit">;
  value: number | null;
}

export interface ComparisonViewRow {
  label: string;
  cells: ComparisonCell[];
}

export const METRIC_COLUMNS: ComparisonCell["key"][] = [
  "mse", "rmse", "mae", "picp", "sharpness", "pinball", "sample_count", "level",
];

export interface ComparisonView {
  columns: string[];
  rows: ComparisonViewRow[];
  unit: string;
  improvement: { label: string; value: number }[];
}

/** Before/after metrics panel: rows are the payload rows, cell for cell. */
export function comparisonTable(payload: ComparisonPayload): ComparisonView {
  const rows = payload.rows.map((row) => ({
    label: row.label,
    cells: METRIC_COLUMNS.map((key) => ({ key, value: row[key] })),
  }));
  const improvement = payload.improvement
    ? [
        { label: "MSE", value: payload.improvement.mse_pct },
        { label: "MAE", value: payload.improvement.mae_pct },
        { label: "Sharpness", value: payload.improvement.sharpness_pct },
        { label: "PICP (pp)", value: payload.improvement.picp_pp },
      ]
    : [];
  return {
    columns: METRIC_COLUMNS.slice(),
    rows,
    unit: payload.rows[0]?.unit ?? "",
    improvement,
  };
}

export function thetaTimeline(policy: PolicyPayload): PolicyPayload["history"] {
  return policy.history.slice();
}

export function jobLabel(job: JobPayload): string {
  if (job.state === "running" || job.state === "done") {
    const p = job.progress;
    if (p && p.epoch !== undefined && p.epoch_cap !== undefined) {
      return `${job.state}: epoch ${p.epoch}/${p.epoch_cap}`;
    }
  }
  if (job.state === "failed") return `failed: ${job.error ?? "unknown error"}`;
  return job.state;
}

/** Human notice for a finished cycle; retrained cycles need none. */
export function cycleNotice(report: CycleReportPayload): string | null {
  if (report.status === "no-op") {
    return `no-op cycle: nothing exceeded theta=${report.theta} and no flagged days were pending`;
  }
  return null;
}

/** Flag-range form guard: past ranges only, end after start. */
export function validateFlagRange(start: string, end: string, now: string): string | null {
  const s = Date.parse(start);
  const e = Date.parse(end);
  if (Number.isNaN(s) || Number.isNaN(e)) return "enter both dates";
  if (e <= s) return "end must come after start";
  if (e > Date.parse(now)) return "only past ranges can be flagged";
  return null;
}

/** Threshold commit form guard: positive theta plus a rationale. */
export function validateThetaSubmit(theta: number, rationale: string): string | null {
  if (!Number.isFinite(theta) || theta <= 0) return "theta must be a positive number";
  if (rationale.trim() === "") return "a rationale is required";
  return null;
}

export function formatNumber(value: number | null, digits = 2): string {
  if (value === null) return "-";
  if (Number.isInteger(value)) return String(value);
  return value.toFixed(digits);
}
