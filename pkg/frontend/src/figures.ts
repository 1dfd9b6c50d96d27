/** Figure builders: each consumes raw result rows and emits an SVG scene plus
 * the exact aggregate table that was plotted (the sidecar contract).
 */

import { AggregatePoint, aggregate } from "./aggregate.js";
import { ResultRow, modelLabel } from "./csv.js";
import { Frame, PALETTE, Svg, frame, legend, trimNumber } from "./svg.js";

export const FIGURE_KINDS = [
  "generalization_curves", "dissection_panels", "adaptation_speed",
  "parameter_space", "shd_convergence",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
  figure: FigureKind;
  metric?: string;
  graph?: string;
  n?: number;
  trainSamples?: string;
  adaptSize?: string;
  adaptMethod?: string;
}

export interface RenderedFigure {
  svg: string;
  aggregates: AggregatePoint[];
}

export class FilterError extends Error {}

const DISSECTION_METRICS = [
  "nll_mean", "nll_intervention", "nll_root", "nll_parents", "nll_remainder",
];

function applyBaseFilters(rows: ResultRow[], spec: FigureSpec): ResultRow[] {
  let out = rows;
  if (spec.graph !== undefined) {
    out = out.filter((r) => r.graph_type === spec.graph);
  }
  if (spec.n !== undefined) {
    out = out.filter((r) => r.n === spec.n);
  }
  return out;
}

function required(rows: ResultRow[], what: string): ResultRow[] {
  if (rows.length === 0) {
    throw new FilterError(`no rows match the requested ${what}`);
  }
  return rows;
}

function uniqueSorted(values: string[]): string[] {
  return [...new Set(values)].sort((a, b) => Number(a) - Number(b));
}

function seriesColors(names: string[]): Map<string, string> {
  const map = new Map<string, string>();
  names.forEach((name, i) => map.set(name, PALETTE[i % PALETTE.length]));
  return map;
}

function yDomainOf(points: AggregatePoint[], extra: number[] = []): [number, number] {
  const lows = points.map((p) => p.mean - p.std).concat(extra);
  const highs = points.map((p) => p.mean + p.std).concat(extra);
  let lo = Math.min(...lows);
  let hi = Math.max(...highs);
  if (!(hi > lo)) {
    hi = lo + 1;
  }
  const pad = 0.06 * (hi - lo);
  return [lo - pad, hi + pad];
}

function drawSeriesWithBand(
  f: Frame, points: AggregatePoint[], color: string,
) {
  const sorted = [...points].sort((a, b) => Number(a.x) - Number(b.x));
  const upper: Array<[number, number]> = sorted.map(
    (p) => [f.x(Number(p.x)), f.y(p.mean + p.std)]);
  const lower: Array<[number, number]> = sorted.map(
    (p) => [f.x(Number(p.x)), f.y(p.mean - p.std)]);
  f.svg.polygon([...upper, ...lower.reverse()], color, 0.18);
  f.svg.polyline(sorted.map((p) => [f.x(Number(p.x)), f.y(p.mean)]), color);
  for (const p of sorted) {
    f.svg.circle(f.x(Number(p.x)), f.y(p.mean), 2.4, color);
  }
}

function drawBoundRefs(f: Frame, bounds: AggregatePoint[], colors: Map<string, string>) {
  for (const b of bounds) {
    const py = f.y(b.mean);
    const color = colors.get(b.series) ?? "#444";
    f.svg.line(f.plotLeft, py, f.plotRight, py, color,
      'stroke-dasharray="6 4" stroke-width="1.6"');
    f.svg.text(f.plotRight - 4, py - 4, modelLabel(b.series),
      `text-anchor="end" font-size="10" fill="${color}"`);
  }
}

/** Mean metric over training-set size, one line per model, bounds as dashed refs. */
function generalizationCurves(rows: ResultRow[], spec: FigureSpec,
                              metricDefault = "nll_mean",
                              modelFilter?: (m: string) => boolean): RenderedFigure {
  const metric = spec.metric ?? metricDefault;
  const base = applyBaseFilters(rows, spec).filter((r) => r.metric === metric);
  let curveRows = base.filter((r) => r.train_samples !== "" && r.adapt_samples === "");
  if (modelFilter) {
    curveRows = curveRows.filter((r) => modelFilter(r.model));
  }
  required(curveRows, `metric ${metric} over train sizes`);
  const boundRows = base.filter((r) => r.train_samples === "");
  const curves = aggregate(curveRows, (r) => r.model, (r) => r.train_samples);
  const bounds = aggregate(boundRows, (r) => r.model, () => "");
  const aggregates = [...curves, ...bounds];

  const svg = new Svg(640, 420);
  const xs = uniqueSorted(curves.map((p) => p.x)).map(Number);
  const xDomain: [number, number] = [Math.min(...xs), Math.max(...xs)];
  const yDomain = yDomainOf(curves, bounds.map((b) => b.mean));
  const f = frame(svg, { x0: 0, y0: 0, x1: 640, y1: 420 }, xDomain, yDomain, {
    title: `${metric} over training-set size`,
    xLabel: "training samples per regime",
    yLabel: `${metric} (nats)`,
    xTicks: xs.map((v) => [v, String(v)]),
  });
  const models = [...new Set(curves.map((p) => p.series))];
  const colors = seriesColors(models.concat(bounds.map((b) => b.series)));
  for (const model of models) {
    drawSeriesWithBand(f, curves.filter((p) => p.series === model),
      colors.get(model)!);
  }
  drawBoundRefs(f, bounds, colors);
  legend(svg, models.map((m) => [modelLabel(m), colors.get(m)!]),
    f.plotLeft + 8, f.plotTop + 14);
  return { svg: svg.render(), aggregates };
}

/** Grouped bars with std whiskers, one panel per dissected metric. */
function dissectionPanels(rows: ResultRow[], spec: FigureSpec): RenderedFigure {
  let base = applyBaseFilters(rows, spec).filter(
    (r) => DISSECTION_METRICS.includes(r.metric) && r.adapt_samples === "");
  const sizes = uniqueSorted(base.filter((r) => r.train_samples !== "")
    .map((r) => r.train_samples));
  const chosen = spec.trainSamples ?? (sizes.length === 1 ? sizes[0] : undefined);
  if (chosen === undefined) {
    throw new FilterError(
      `dissection_panels needs a single training size; found [${sizes.join(", ")}] ` +
      "(pass --train-samples)");
  }
  base = base.filter((r) => r.train_samples === chosen || r.train_samples === "");
  required(base.filter((r) => r.train_samples === chosen), "dissection metrics");
  const points = aggregate(base, (r) => r.model, (r) => r.metric);

  const models = [...new Set(points.map((p) => p.series))];
  const colors = seriesColors(models);
  const panelW = 250;
  const svg = new Svg(panelW * DISSECTION_METRICS.length, 360);
  DISSECTION_METRICS.forEach((metric, pi) => {
    const panelPoints = points.filter((p) => p.x === metric);
    if (panelPoints.length === 0) {
      return;
    }
    const yDomain = yDomainOf(panelPoints, [0]);
    const f = frame(svg, { x0: pi * panelW, y0: 0, x1: (pi + 1) * panelW, y1: 360 },
      [0, panelPoints.length], yDomain,
      { title: metric, xTicks: [] });
    panelPoints.forEach((p, bi) => {
      const color = colors.get(p.series)!;
      const x0 = f.x(bi + 0.15);
      const x1 = f.x(bi + 0.85);
      const y0 = f.y(Math.max(0, yDomain[0]));
      const y1 = f.y(p.mean);
      svg.rect(x0, Math.min(y0, y1), x1 - x0, Math.abs(y0 - y1), color);
      const cx = (x0 + x1) / 2;
      svg.line(cx, f.y(p.mean - p.std), cx, f.y(p.mean + p.std), "#333",
        'stroke-width="1.4"');
      svg.text(cx, f.plotBottom + 14, modelLabel(p.series),
        `text-anchor="end" font-size="9" transform="rotate(-35 ${cx} ${f.plotBottom + 14})"`);
    });
  });
  legend(svg, models.map((m) => [modelLabel(m), colors.get(m)!]), 8, 14);
  return { svg: svg.render(), aggregates: points };
}

/** Metric over adaptation steps, one line per (model, method). */
function adaptationSpeed(rows: ResultRow[], spec: FigureSpec): RenderedFigure {
  const metric = spec.metric ?? "nll_mean";
  let base = applyBaseFilters(rows, spec).filter((r) => r.metric === metric);
  const stepRows = base.filter((r) => r.step !== "" && r.adapt_samples !== "");
  const sizes = uniqueSorted(stepRows.map((r) => r.adapt_samples));
  const chosen = spec.adaptSize ?? (sizes.length === 1 ? sizes[0] : undefined);
  if (chosen === undefined) {
    throw new FilterError(
      `adaptation_speed needs a single adaptation size; found [${sizes.join(", ")}] ` +
      "(pass --adapt-size)");
  }
  let traces = stepRows.filter((r) => r.adapt_samples === chosen);
  if (spec.adaptMethod !== undefined) {
    traces = traces.filter((r) => r.adapt_method === spec.adaptMethod);
  }
  required(traces, `metric ${metric} at adapt size ${chosen}`);
  const methods = new Set(traces.map((r) => r.adapt_method));
  const seriesOf = (r: ResultRow) =>
    methods.size > 1 ? `${r.model}:${r.adapt_method}` : r.model;
  const curves = aggregate(traces, seriesOf, (r) => r.step);
  const boundRows = base.filter((r) => r.train_samples === "" && r.step === "");
  const bounds = aggregate(boundRows, (r) => r.model, () => "");

  const svg = new Svg(640, 420);
  const xs = uniqueSorted(curves.map((p) => p.x)).map(Number);
  const f = frame(svg, { x0: 0, y0: 0, x1: 640, y1: 420 },
    [Math.min(...xs), Math.max(...xs)], yDomainOf(curves, bounds.map((b) => b.mean)), {
      title: `${metric} during adaptation (${chosen} samples)`,
      xLabel: "gradient step",
      yLabel: `${metric} (nats)`,
      xTicks: xs.map((v) => [v, String(v)]),
    });
  const names = [...new Set(curves.map((p) => p.series))];
  const colors = seriesColors(names.concat(bounds.map((b) => b.series)));
  for (const name of names) {
    drawSeriesWithBand(f, curves.filter((p) => p.series === name), colors.get(name)!);
  }
  drawBoundRefs(f, bounds, colors);
  legend(svg, names.map((s) => {
    const [model, method] = s.split(":");
    return [method ? `${modelLabel(model)} (${method})` : modelLabel(model),
      colors.get(s)!] as [string, string];
  }), f.plotLeft + 8, f.plotTop + 14);
  return { svg: svg.render(), aggregates: [...curves, ...bounds] };
}

/** Per-model bars of intervened vs. other-module gradient norms (step 0). */
function parameterSpace(rows: ResultRow[], spec: FigureSpec): RenderedFigure {
  let base = applyBaseFilters(rows, spec).filter(
    (r) => (r.metric === "grad_norm_intervened" || r.metric === "grad_norm_others")
      && r.step === "0");
  const sizes = uniqueSorted(base.map((r) => r.adapt_samples));
  const chosen = spec.adaptSize ?? (sizes.length === 1 ? sizes[0] : undefined);
  if (chosen === undefined) {
    throw new FilterError(
      `parameter_space needs a single adaptation size; found [${sizes.join(", ")}] ` +
      "(pass --adapt-size)");
  }
  base = required(base.filter((r) => r.adapt_samples === chosen), "gradient norms");
  const points = aggregate(base, (r) => r.model, (r) => r.metric);

  const models = [...new Set(points.map((p) => p.series))];
  const svg = new Svg(140 + models.length * 150, 380);
  const yDomain = yDomainOf(points, [0]);
  const f = frame(svg, { x0: 0, y0: 0, x1: svg.width, y1: 380 },
    [0, models.length], yDomain, {
      title: `gradient norms at adaptation (${chosen} samples)`,
      yLabel: "L2 gradient norm",
      xTicks: models.map((m, i) => [i + 0.5, modelLabel(m)] as [number, string]),
    });
  const barColors: Record<string, string> = {
    grad_norm_intervened: "#c44e52",
    grad_norm_others: "#4c72b0",
  };
  models.forEach((model, mi) => {
    (["grad_norm_intervened", "grad_norm_others"] as const).forEach((metric, bi) => {
      const p = points.find((q) => q.series === model && q.x === metric);
      if (!p) {
        return;
      }
      const x0 = f.x(mi + 0.12 + bi * 0.4);
      const x1 = f.x(mi + 0.46 + bi * 0.4);
      svg.rect(x0, f.y(p.mean), x1 - x0, f.y(Math.max(0, yDomain[0])) - f.y(p.mean),
        barColors[metric]);
      const cx = (x0 + x1) / 2;
      svg.line(cx, f.y(p.mean - p.std), cx, f.y(p.mean + p.std), "#333",
        'stroke-width="1.4"');
    });
  });
  legend(svg, [["intervened module", barColors.grad_norm_intervened],
    ["other modules (mean)", barColors.grad_norm_others]],
  f.plotLeft + 8, f.plotTop + 14);
  return { svg: svg.render(), aggregates: points };
}

/** Structural Hamming distance of the learned graph over training size. */
function shdConvergence(rows: ResultRow[], spec: FigureSpec): RenderedFigure {
  return generalizationCurves(rows, { ...spec, metric: "shd" }, "shd",
    (m) => m === "l_causal");
}

export function render(rows: ResultRow[], spec: FigureSpec): RenderedFigure {
  switch (spec.figure) {
    case "generalization_curves":
      return generalizationCurves(rows, spec);
    case "dissection_panels":
      return dissectionPanels(rows, spec);
    case "adaptation_speed":
      return adaptationSpeed(rows, spec);
    case "parameter_space":
      return parameterSpace(rows, spec);
    case "shd_convergence":
      return shdConvergence(rows, spec);
    default:
      throw new FilterError(`unknown figure kind ${spec.figure}`);
  }
}
