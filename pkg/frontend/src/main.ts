/** Console shell: three views over the service API, 2 s job polling. */
import { Api, ServiceError } from "./api.js";
import type {
  CycleReportPayload,
  FlagsPayload,
  ForecastPayload,
  JobPayload,
} from "./api.js";
import { layoutChart } from "./chart.js";
import {
  buildForecastView,
  comparisonTable,
  cycleNotice,
  formatNumber,
  hoverReadout,
  jobLabel,
  operatorFlaggedDays,
  previewHighlights,
  thetaTimeline,
  validateFlagRange,
  validateThetaSubmit,
} from "./viewmodel.js";

const api = new Api();
const POLL_MS = 2000;

type Attrs = Record<string, string | ((ev: Event) => void)>;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Attrs = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") node.addEventListener(key, value);
    else node.setAttribute(key, value);
  }
  for (const child of children) node.append(child);
  return node;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  return node;
}

function errorBox(err: unknown, retry: () => void): HTMLElement {
  const message =
    err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err);
  return el("div", { class: "error-box" }, [
    el("span", {}, [message]),
    el("button", { click: retry }, ["retry"]),
  ]);
}

function clearAndMount(host: HTMLElement, node: Node): void {
  host.replaceChildren(node);
}

// --- forecast view ---

function renderChart(
  payload: ForecastPayload,
  flagRanges: { start: string; end: string }[],
): HTMLElement {
  const view = buildForecastView(payload);
  // UTC RFC 3339 strings compare correctly as strings, so range containment
  // needs no Date parsing here.
  const flagged = flagRanges.some((f) => view.date >= f.start && view.date < f.end);
  const geom = layoutChart(view.points);
  const svg = svgEl("svg", {
    viewBox: "0 0 720 320",
    class: "chart",
    role: "img",
  });
  for (const band of geom.bandPaths) {
    svg.append(svgEl("path", { d: band, class: "band" }));
  }
  if (flagged) {
    svg.append(
      svgEl("rect", {
        x: "56", y: "12", width: "648", height: "280",
        class: "flag-shade",
      }),
    );
  }
  svg.append(svgEl("path", { d: geom.muPath, class: "mu-line" }));
  for (const tick of geom.xTicks) {
    const label = svgEl("text", {
      x: String(tick.x), y: "312", class: "tick-label",
    });
    label.textContent = tick.label;
    svg.append(label);
  }
  for (const tick of geom.yTicks) {
    const label = svgEl("text", {
      x: "4", y: String(tick.y + 4), class: "tick-label",
    });
    label.textContent = tick.label;
    svg.append(label);
  }
  geom.points.forEach((pt, i) => {
    const dot = svgEl("circle", {
      cx: String(pt.x), cy: String(pt.y), r: "3", class: "mu-dot",
    });
    const tip = svgEl("title", {});
    const hour = view.points[i];
    if (hour) tip.textContent = hoverReadout(hour);
    dot.append(tip);
    svg.append(dot);
  });

  const badge = view.highlighted
    ? el("span", { class: "badge warn" }, [
        `max sigma ${formatNumber(view.maxSigma)} > theta ${formatNumber(view.theta)}`,
      ])
    : el("span", { class: "badge ok" }, ["within threshold"]);
  const flagBadge = flagged
    ? el("span", { class: "badge flag" }, ["operator-flagged"])
    : "";
  return el("div", {}, [
    el("div", { class: "chart-meta" }, [
      el("span", {}, [`model ${view.modelId}`]),
      el("span", {}, [`level ${view.level}`]),
      el("span", {}, [`unit ${view.unit}`]),
      badge,
      flagBadge,
    ]),
    svg,
  ]);
}

function forecastView(): HTMLElement {
  const root = el("section", { class: "view" });
  const dateInput = el("input", { type: "date", value: "2021-01-21" });
  const levelInput = el("input", {
    type: "number", step: "0.01", min: "0.01", max: "0.99", value: "0.95",
  });
  const chartHost = el("div", { class: "chart-host" });

  const load = async () => {
    clearAndMount(chartHost, el("p", { class: "muted" }, ["loading..."]));
    try {
      const [payload, flags] = await Promise.all([
        api.forecast(dateInput.value, Number(levelInput.value)),
        api.rareFlags(),
      ]);
      clearAndMount(chartHost, renderChart(payload, flags.flags));
    } catch (err) {
      clearAndMount(chartHost, errorBox(err, load));
    }
  };

  const flagStart = el("input", { type: "date" });
  const flagEnd = el("input", { type: "date" });
  const flagNote = el("input", { type: "text", placeholder: "note" });
  const flagStatus = el("span", { class: "muted" });
  const submitFlag = async () => {
    const problem = validateFlagRange(
      flagStart.value, flagEnd.value, new Date().toISOString(),
    );
    if (problem) {
      flagStatus.textContent = problem;
      return;
    }
    try {
      const out = await api.flagRareEvent(
        flagStart.value, flagEnd.value, flagNote.value, "console",
      );
      flagStatus.textContent = out.created
        ? `flagged as ${out.flag.id}`
        : out.notice ?? "already flagged";
      void load();
    } catch (err) {
      flagStatus.textContent = err instanceof ServiceError ? err.message : String(err);
    }
  };

  root.append(
    el("h2", {}, ["Day-ahead forecast"]),
    el("div", { class: "controls" }, [
      el("label", {}, ["date ", dateInput]),
      el("label", {}, ["level ", levelInput]),
      el("button", { click: () => void load() }, ["load"]),
    ]),
    chartHost,
    el("h3", {}, ["Flag a rare event"]),
    el("div", { class: "controls" }, [
      el("label", {}, ["from ", flagStart]),
      el("label", {}, ["to ", flagEnd]),
      flagNote,
      el("button", { click: () => void submitFlag() }, ["flag range"]),
      flagStatus,
    ]),
  );
  void load();
  return root;
}

// --- active learning view ---

function comparisonPanel(report: CycleReportPayload): HTMLElement {
  const host = el("div", { class: "panel" });
  const notice = cycleNotice(report);
  host.append(
    el("h4", {}, [
      `cycle ${report.cycle}: ${report.status}, queried ${report.queried}, ` +
      `augmented ${report.augmented_days.length} day(s)`,
    ]),
  );
  if (notice) {
    host.append(el("p", { class: "muted" }, [notice]));
    return host;
  }
  api
    .comparison(report.cycle)
    .then((payload) => {
      const view = comparisonTable(payload);
      const table = el("table", { class: "metrics" });
      table.append(
        el("tr", {}, [
          el("th", {}, ["phase"]),
          ...view.columns.map((c) => el("th", {}, [c])),
        ]),
      );
      for (const row of view.rows) {
        table.append(
          el("tr", {}, [
            el("td", {}, [row.label]),
            ...row.cells.map((cell) =>
              el("td", {}, [formatNumber(cell.value, 3)]),
            ),
          ]),
        );
      }
      host.append(table);
      if (view.improvement.length) {
        host.append(
          el("p", { class: "muted" }, [
            "improvement: " +
              view.improvement
                .map((i) => {
                  const suffix = i.label.includes("(pp)") ? "" : "%";
                  return `${i.label} ${formatNumber(i.value, 2)}${suffix}`;
                })
                .join(", "),
          ]),
        );
      }
    })
    .catch((err) => host.append(errorBox(err, () => undefined)));
  return host;
}

function alView(): HTMLElement {
  const root = el("section", { class: "view" });
  let lastFlags: FlagsPayload | null = null;

  // threshold panel
  const thetaSlider = el("input", {
    type: "range", min: "1", max: "5000", step: "1", value: "1000",
  });
  const thetaNumber = el("input", { type: "number", min: "1", value: "1000" });
  const rationale = el("input", { type: "text", placeholder: "rationale (required)" });
  const commitBtn = el("button", {}, ["commit theta"]) as HTMLButtonElement;
  const previewOut = el("p", { class: "muted" }, ["no archive window loaded"]);
  const timelineHost = el("ul", { class: "timeline" });
  const policyStatus = el("span", { class: "muted" });

  const refreshPreview = () => {
    const theta = Number(thetaNumber.value);
    commitBtn.disabled = validateThetaSubmit(theta, rationale.value) !== null;
    if (!lastFlags) return;
    const hits = previewHighlights(lastFlags.days, theta);
    const operator = operatorFlaggedDays(lastFlags.days);
    previewOut.textContent =
      `preview at theta=${theta}: ${hits.length} day(s) over threshold` +
      `${hits.length ? " [" + hits.map((d) => d.slice(0, 10)).join(", ") + "]" : ""}` +
      `${operator.length ? `; operator-flagged: ${operator.map((d) => d.slice(0, 10)).join(", ")}` : ""}`;
  };
  thetaSlider.addEventListener("input", () => {
    thetaNumber.value = thetaSlider.value;
    refreshPreview();
  });
  thetaNumber.addEventListener("input", () => {
    thetaSlider.value = thetaNumber.value;
    refreshPreview();
  });
  rationale.addEventListener("input", refreshPreview);

  const loadPolicy = async () => {
    try {
      const policy = await api.threshold();
      thetaNumber.value = String(policy.theta);
      thetaSlider.value = String(policy.theta);
      timelineHost.replaceChildren(
        ...thetaTimeline(policy).map((event) =>
          el("li", {}, [
            `${event.at}  theta=${event.theta}  by ${event.set_by}` +
            (event.rationale ? `  (${event.rationale})` : ""),
          ]),
        ),
      );
      policyStatus.textContent = `current theta ${policy.theta} set by ${policy.set_by}`;
      refreshPreview();
    } catch (err) {
      policyStatus.textContent = String(err);
    }
  };

  const commit = async () => {
    const theta = Number(thetaNumber.value);
    const problem = validateThetaSubmit(theta, rationale.value);
    if (problem) {
      policyStatus.textContent = problem;
      return;
    }
    try {
      await api.setThreshold(theta, rationale.value, "console");
      rationale.value = "";
      await loadPolicy();
    } catch (err) {
      policyStatus.textContent = err instanceof ServiceError ? err.message : String(err);
    }
  };
  commitBtn.addEventListener("click", () => void commit());

  // uncertainty window
  const winStart = el("input", { type: "date", value: "2021-01-20" });
  const winEnd = el("input", { type: "date", value: "2021-01-25" });
  const flagsHost = el("div", {});
  const loadFlags = async () => {
    try {
      lastFlags = await api.uncertaintyFlags(winStart.value, winEnd.value);
      const rows = lastFlags.days.map((d) =>
        el("li", {}, [
          `${d.date.slice(0, 10)}  max sigma ${d.max_sigma === null ? "-" : formatNumber(d.max_sigma)}` +
          `  [${d.sources.join(", ")}]` + (d.note ? `  "${d.note}"` : ""),
        ]),
      );
      clearAndMount(
        flagsHost,
        rows.length
          ? el("ul", { class: "flag-list" }, rows)
          : el("p", { class: "muted" }, ["no flagged days in this window"]),
      );
      refreshPreview();
    } catch (err) {
      clearAndMount(flagsHost, errorBox(err, () => void loadFlags()));
    }
  };

  // cycle runner
  const cycleBtn = el("button", {}, ["run AL cycle"]) as HTMLButtonElement;
  const cycleStatus = el("span", { class: "muted" });
  const reportHost = el("div", {});
  let pollTimer: number | undefined;

  const watchJob = (job: JobPayload) => {
    cycleBtn.disabled = true;
    cycleStatus.textContent = jobLabel(job);
    const poll = async () => {
      try {
        const snap = await api.job(job.id);
        cycleStatus.textContent = jobLabel(snap);
        if (snap.state === "done" || snap.state === "failed") {
          window.clearInterval(pollTimer);
          cycleBtn.disabled = false;
          if (snap.state === "done" && snap.result) {
            clearAndMount(
              reportHost,
              comparisonPanel(snap.result as unknown as CycleReportPayload),
            );
          }
          void loadPolicy();
          void loadCycles();
        }
      } catch (err) {
        window.clearInterval(pollTimer);
        cycleBtn.disabled = false;
        cycleStatus.textContent = String(err);
      }
    };
    pollTimer = window.setInterval(() => void poll(), POLL_MS);
    void poll();
  };

  const startCycle = async () => {
    try {
      watchJob(await api.startCycle());
    } catch (err) {
      cycleStatus.textContent =
        err instanceof ServiceError && err.httpStatus === 409
          ? `busy or not ready: ${err.message}`
          : String(err);
    }
  };
  cycleBtn.addEventListener("click", () => void startCycle());

  const cyclesHost = el("ul", { class: "cycle-list" });
  const loadCycles = async () => {
    try {
      const { cycles } = await api.cycles();
      cyclesHost.replaceChildren(
        ...cycles.map((c) =>
          el("li", {}, [
            el("a", {
              href: "#",
              click: (ev) => {
                ev.preventDefault();
                api
                  .cycle(c.cycle)
                  .then((report) => clearAndMount(reportHost, comparisonPanel(report)))
                  .catch((err) => clearAndMount(reportHost, errorBox(err, () => undefined)));
              },
            }, [
              `cycle ${c.cycle} (${c.status}) theta=${c.theta} queried=${c.queried}`,
            ]),
          ]),
        ),
      );
    } catch {
      /* no cycles yet is fine */
    }
  };

  root.append(
    el("h2", {}, ["Active learning"]),
    el("h3", {}, ["Threshold"]),
    el("div", { class: "controls" }, [thetaSlider, thetaNumber, rationale, commitBtn, policyStatus]),
    previewOut,
    el("h4", {}, ["History"]),
    timelineHost,
    el("h3", {}, ["Uncertainty window"]),
    el("div", { class: "controls" }, [
      el("label", {}, ["from ", winStart]),
      el("label", {}, ["to ", winEnd]),
      el("button", { click: () => void loadFlags() }, ["refresh"]),
    ]),
    flagsHost,
    el("h3", {}, ["Cycles"]),
    el("div", { class: "controls" }, [cycleBtn, cycleStatus]),
    cyclesHost,
    reportHost,
  );
  void loadPolicy();
  void loadFlags();
  void loadCycles();
  return root;
}

// --- data view ---

function dataView(): HTMLElement {
  const root = el("section", { class: "view" });
  const summaryHost = el("div", {});
  const modelHost = el("div", {});
  const trainStatus = el("span", { class: "muted" });
  const trainBtn = el("button", {}, ["train initial model"]) as HTMLButtonElement;
  let pollTimer: number | undefined;

  const loadSummary = async () => {
    try {
      const data = await api.dataset();
      const table = el("table", { class: "metrics" }, [
        el("tr", {}, [
          el("th", {}, ["series"]), el("th", {}, ["start"]),
          el("th", {}, ["end"]), el("th", {}, ["hours"]), el("th", {}, ["unit"]),
        ]),
      ]);
      for (const [name, s] of Object.entries(data.series)) {
        table.append(
          el("tr", {}, [
            el("td", {}, [name]),
            el("td", {}, [s.start]),
            el("td", {}, [s.end]),
            el("td", {}, [String(s.hours)]),
            el("td", {}, [s.unit]),
          ]),
        );
      }
      clearAndMount(summaryHost, table);
    } catch (err) {
      clearAndMount(summaryHost, errorBox(err, () => void loadSummary()));
    }
  };

  const loadModel = async () => {
    try {
      const info = await api.modelInfo();
      clearAndMount(
        modelHost,
        el("p", {}, [
          `active model ${info.model_id}, cycles run ${info.cycles_run}, ` +
          `training days ${info.training_days}`,
        ]),
      );
    } catch {
      clearAndMount(modelHost, el("p", { class: "muted" }, ["no trained model yet"]));
    }
  };

  trainBtn.addEventListener("click", () => {
    void (async () => {
      try {
        const job = await api.startTraining();
        trainBtn.disabled = true;
        const poll = async () => {
          try {
            const snap = await api.job(job.id);
            trainStatus.textContent = jobLabel(snap);
            if (snap.state === "done" || snap.state === "failed") {
              window.clearInterval(pollTimer);
              trainBtn.disabled = false;
              void loadModel();
            }
          } catch (err) {
            window.clearInterval(pollTimer);
            trainBtn.disabled = false;
            trainStatus.textContent = String(err);
          }
        };
        pollTimer = window.setInterval(() => void poll(), POLL_MS);
        void poll();
      } catch (err) {
        trainStatus.textContent =
          err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err);
      }
    })();
  });

  root.append(
    el("h2", {}, ["Data"]),
    summaryHost,
    el("h3", {}, ["Model"]),
    modelHost,
    el("div", { class: "controls" }, [trainBtn, trainStatus]),
  );
  void loadSummary();
  void loadModel();
  return root;
}

// --- shell ---

function mountApp(host: HTMLElement): void {
  const views: Record<string, () => HTMLElement> = {
    Forecast: forecastView,
    "Active Learning": alView,
    Data: dataView,
  };
  const content = el("main", {});
  const nav = el("nav", {},
    Object.keys(views).map((name) =>
      el("button", {
        class: "tab",
        click: (ev) => {
          document.querySelectorAll("nav .tab").forEach((b) => b.classList.remove("active"));
          (ev.currentTarget as HTMLElement).classList.add("active");
          clearAndMount(content, views[name]!());
        },
      }, [name]),
    ),
  );
  host.append(el("header", {}, [el("h1", {}, ["gridcast console"]), nav]), content);
  (nav.firstElementChild as HTMLElement).classList.add("active");
  clearAndMount(content, forecastView());
}

const appHost = document.getElementById("app");
if (appHost) mountApp(appHost);
