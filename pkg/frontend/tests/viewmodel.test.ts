import { describe, expect, it } from "vitest";

import type {
  ComparisonPayload,
  CycleReportPayload,
  FlagsPayload,
  ForecastPayload,
  JobPayload,
  PolicyPayload,
} from "../src/api.js";
import {
  METRIC_COLUMNS,
  buildForecastView,
  comparisonTable,
  cycleNotice,
  hoverReadout,
  jobLabel,
  operatorFlaggedDays,
  previewHighlights,
  thetaTimeline,
  validateFlagRange,
  validateThetaSubmit,
} from "../src/viewmodel.js";
import { payload } from "./fixture.js";

const forecast = payload<ForecastPayload>("forecast");
const flags = payload<FlagsPayload>("uncertainty_flags");
const comparison = payload<ComparisonPayload>("comparison");
const trainJob = payload<JobPayload>("setup_train_job");
const cycleReport = payload<CycleReportPayload>("cycle_detail");
const policy = payload<PolicyPayload>("threshold_current");

describe("forecast view", () => {
  it("maps a recorded day-ahead payload to 24 chart points, values verbatim", () => {
    const view = buildForecastView(forecast);
    expect(view.points).toHaveLength(24);
    expect(view.modelId).toBe(forecast.model_id);
    expect(view.level).toBe(forecast.record.level);
    expect(view.unit).toBe("MW");
    view.points.forEach((p, h) => {
      expect(p.hour).toBe(h);
      expect(p.mu).toBe(forecast.record.mu[h]);
      expect(p.sigma).toBe(forecast.record.sigma[h]);
      expect(p.lower).toBe(forecast.record.lower[h]);
      expect(p.upper).toBe(forecast.record.upper[h]);
      expect(p.band).toBe(true);
      expect(p.lower).toBeLessThanOrEqual(p.mu);
      expect(p.mu).toBeLessThanOrEqual(p.upper);
    });
  });

  it("stamps hourly timestamps starting at the issue time", () => {
    const view = buildForecastView(forecast);
    expect(view.points[0]!.timestamp).toBe("2021-01-21T00:00:00Z");
    expect(view.points[5]!.timestamp).toBe("2021-01-21T05:00:00Z");
    expect(view.points[23]!.timestamp).toBe("2021-01-21T23:00:00Z");
  });

  it("highlights the day exactly when the payload max sigma exceeds theta", () => {
    const view = buildForecastView(forecast);
    expect(view.maxSigma).toBe(Math.max(...forecast.record.sigma));
    expect(view.highlighted).toBe(view.maxSigma > forecast.theta);
    expect(view.highlighted).toBe(true);
  });

  it("hover readout quotes the payload numbers untouched", () => {
    const view = buildForecastView(forecast);
    const p = view.points[7]!;
    const text = hoverReadout(p);
    expect(text).toContain(`mu=${forecast.record.mu[7]}`);
    expect(text).toContain(`sigma=${forecast.record.sigma[7]}`);
    expect(text).toContain(`L=${forecast.record.lower[7]}`);
    expect(text).toContain(`U=${forecast.record.upper[7]}`);
  });

  it("collapsed intervals drop the band but keep the point", () => {
    const collapsed: ForecastPayload = JSON.parse(JSON.stringify(forecast));
    collapsed.record.lower[3] = collapsed.record.upper[3]!;
    const view = buildForecastView(collapsed);
    expect(view.points[3]!.band).toBe(false);
    expect(view.points[2]!.band).toBe(true);
    expect(view.points).toHaveLength(24);
  });

  it("rejects a record whose arrays disagree in length", () => {
    const broken: ForecastPayload = JSON.parse(JSON.stringify(forecast));
    broken.record.sigma = broken.record.sigma.slice(0, 20);
    expect(() => buildForecastView(broken)).toThrow(/length/);
  });
});

describe("threshold slider preview", () => {
  it("at the stored theta it reproduces the server's uncertainty list", () => {
    const hits = previewHighlights(flags.days, flags.theta);
    const serverSaysUncertain = flags.days
      .filter((d) => d.sources.includes("uncertainty"))
      .map((d) => d.date);
    expect(new Set(hits)).toEqual(new Set(serverSaysUncertain));
  });

  it("a prohibitive theta clears every highlight", () => {
    expect(previewHighlights(flags.days, 1e9)).toEqual([]);
  });

  it("raising theta never adds a highlight", () => {
    const sigmas = flags.days
      .map((d) => d.max_sigma)
      .filter((s): s is number => s !== null)
      .sort((a, b) => a - b);
    let previous = new Set(previewHighlights(flags.days, 0));
    for (const cut of sigmas) {
      const next = new Set(previewHighlights(flags.days, cut));
      for (const day of next) expect(previous.has(day)).toBe(true);
      expect(next.size).toBeLessThan(previous.size);
      previous = next;
    }
  });

  it("operator-only days carry no sigma and never preview-highlight", () => {
    const operatorOnly: FlagsPayload["days"] = [
      { date: "2021-02-01T00:00:00Z", max_sigma: null, theta: 10, sources: ["operator-flagged"] },
    ];
    expect(previewHighlights(operatorOnly, 0)).toEqual([]);
    expect(operatorFlaggedDays(operatorOnly)).toEqual(["2021-02-01T00:00:00Z"]);
  });

  it("the recorded window separates operator-flagged from sigma-only days", () => {
    expect(operatorFlaggedDays(flags.days)).toEqual(["2021-01-21T00:00:00Z"]);
  });
});

describe("cycle comparison panel", () => {
  it("renders the recorded rows cell for cell without recomputation", () => {
    const view = comparisonTable(comparison);
    expect(view.rows.map((r) => r.label)).toEqual(["before", "after"]);
    expect(view.columns).toEqual(METRIC_COLUMNS);
    view.rows.forEach((row, i) => {
      const source = comparison.rows[i]!;
      row.cells.forEach((cell) => {
        expect(cell.value).toBe(source[cell.key]);
      });
    });
    expect(view.unit).toBe("MW");
  });

  it("passes the improvement block through verbatim", () => {
    const view = comparisonTable(comparison);
    const byLabel = Object.fromEntries(view.improvement.map((i) => [i.label, i.value]));
    expect(byLabel["MSE"]).toBe(comparison.improvement!.mse_pct);
    expect(byLabel["MAE"]).toBe(comparison.improvement!.mae_pct);
    expect(byLabel["Sharpness"]).toBe(comparison.improvement!.sharpness_pct);
    expect(byLabel["PICP (pp)"]).toBe(comparison.improvement!.picp_pp);
  });

  it("a retrained cycle needs no notice; a no-op cycle gets one", () => {
    expect(cycleReport.status).toBe("retrained");
    expect(cycleNotice(cycleReport)).toBeNull();
    const noop: CycleReportPayload = { ...cycleReport, status: "no-op", queried: 0 };
    expect(cycleNotice(noop)).toMatch(/no-op/);
  });
});

describe("job progress label", () => {
  it("summarises a finished training job with its epoch count", () => {
    expect(trainJob.state).toBe("done");
    expect(jobLabel(trainJob)).toBe("done: epoch 2/2");
  });

  it("reports failures with the recorded error text", () => {
    const failed: JobPayload = { ...trainJob, state: "failed", error: "DomainError: boom" };
    expect(jobLabel(failed)).toBe("failed: DomainError: boom");
  });

  it("queued jobs show their state only", () => {
    const queued: JobPayload = {
      ...trainJob, state: "queued", progress: { epoch: 0, epoch_cap: 0 },
    };
    expect(jobLabel(queued)).toBe("queued");
  });
});

describe("threshold history", () => {
  it("exposes every recorded change in order", () => {
    const events = thetaTimeline(policy);
    expect(events.map((e) => e.theta)).toEqual([1000.0, 350.0]);
    expect(events[1]!.set_by).toBe("op-1");
    expect(events[1]!.rationale).toBe("pilot review");
  });
});

describe("form guards", () => {
  const now = "2021-02-01T00:00:00Z";

  it("flag ranges must be complete, ordered, and in the past", () => {
    expect(validateFlagRange("2021-01-21", "2021-01-22", now)).toBeNull();
    expect(validateFlagRange("", "2021-01-22", now)).toMatch(/both dates/);
    expect(validateFlagRange("2021-01-22", "2021-01-21", now)).toMatch(/after start/);
    expect(validateFlagRange("2021-01-21", "2021-01-21", now)).toMatch(/after start/);
    expect(validateFlagRange("2021-03-01", "2021-03-02", now)).toMatch(/past/);
  });

  it("theta commits need a positive value and a rationale", () => {
    expect(validateThetaSubmit(350, "pilot review")).toBeNull();
    expect(validateThetaSubmit(350, "   ")).toMatch(/rationale/);
    expect(validateThetaSubmit(0, "x")).toMatch(/positive/);
    expect(validateThetaSubmit(Number.NaN, "x")).toMatch(/positive/);
  });
});
