/** SVG geometry for the day-ahead band chart.
 *
 * Pure coordinate mapping: payload values in, path strings out. Kept free
 * of DOM access so the contract tests can run it headless.
 */
import type { HourPoint } from "./viewmodel.js";

export interface ChartLayout {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_LAYOUT: ChartLayout = {
  width: 720,
  height: 320,
  padLeft: 56,
  padRight: 16,
  padTop: 12,
  padBottom: 28,
};

export interface ChartGeometry {
  muPath: string;
  bandPaths: string[];           // one closed path per contiguous drawable run
  points: { x: number; y: number; hour: number }[];
  xTicks: { x: number; label: string }[];
  yTicks: { y: number; label: string }[];
  yMin: number;
  yMax: number;
}

function fmt(v: number): string {
  return Number(v.toFixed(2)).toString();
}

export function layoutChart(
  points: HourPoint[],
  layout: ChartLayout = DEFAULT_LAYOUT,
): ChartGeometry {
  if (points.length === 0) throw new Error("no points to lay out");
  let lo = Infinity;
  let hi = -Infinity;
  for (const p of points) {
    lo = Math.min(lo, p.band ? p.lower : p.mu);
    hi = Math.max(hi, p.band ? p.upper : p.mu);
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const span = hi - lo;
  lo -= span * 0.05;
  hi += span * 0.05;

  const innerW = layout.width - layout.padLeft - layout.padRight;
  const innerH = layout.height - layout.padTop - layout.padBottom;
  const xAt = (hour: number) =>
    layout.padLeft + (points.length === 1 ? 0 : (hour / (points.length - 1)) * innerW);
  const yAt = (v: number) => layout.padTop + (1 - (v - lo) / (hi - lo)) * innerH;

  const muPath = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${fmt(xAt(p.hour))},${fmt(yAt(p.mu))}`)
    .join(" ");

  // The band is only drawn where lower < upper; degenerate hours split it.
  const bandPaths: string[] = [];
  let run: HourPoint[] = [];
  const flush = () => {
    if (run.length < 2) {
      run = [];
      return;
    }
    const top = run.map(
      (p, i) => `${i === 0 ? "M" : "L"}${fmt(xAt(p.hour))},${fmt(yAt(p.upper))}`,
    );
    const bottom = [...run]
      .reverse()
      .map((p) => `L${fmt(xAt(p.hour))},${fmt(yAt(p.lower))}`);
    bandPaths.push([...top, ...bottom, "Z"].join(" "));
    run = [];
  };
  for (const p of points) {
    if (p.band) run.push(p);
    else flush();
  }
  flush();

  const xTicks = points
    .filter((p) => p.hour % 6 === 0)
    .map((p) => ({ x: xAt(p.hour), label: `${String(p.hour).padStart(2, "0")}:00` }));
  const yTicks: ChartGeometry["yTicks"] = [];
  for (let i = 0; i <= 4; i++) {
    const v = lo + ((hi - lo) * i) / 4;
    yTicks.push({ y: yAt(v), label: fmt(Math.round(v)) });
  }

  return {
    muPath,
    bandPaths,
    points: points.map((p) => ({ x: xAt(p.hour), y: yAt(p.mu), hour: p.hour })),
    xTicks,
    yTicks,
    yMin: lo,
    yMax: hi,
  };
}

/** Count coordinate pairs in a path string (test helper, exported on purpose). */
export function pathPointCount(path: string): number {
  return (path.match(/[ML]-?\d/g) ?? []).length;
}
