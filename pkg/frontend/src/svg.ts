/** Small SVG scene builder: linear scales, axes, polylines, bands, bars. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const PALETTE = [
  "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
  "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd",
];

export function linearScale(domain: [number, number], range: [number, number]) {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const rawStep = (hi - lo) / n;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const candidates = [1, 2, 2.5, 5, 10].map((c) => c * mag);
  const step = candidates.find((c) => c >= rawStep) ?? candidates[candidates.length - 1];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += step) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export class Svg {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {}

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, opts = "") {
    this.parts.push(
      `<line x1="${x1.toFixed(2)}" y1="${y1.toFixed(2)}" x2="${x2.toFixed(2)}" ` +
      `y2="${y2.toFixed(2)}" stroke="${stroke}" ${opts}/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.8) {
    const attr = points.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
    this.parts.push(
      `<polyline points="${attr}" fill="none" stroke="${stroke}" stroke-width="${width}"/>`,
    );
  }

  polygon(points: Array<[number, number]>, fill: string, opacity: number) {
    const attr = points.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
    this.parts.push(`<polygon points="${attr}" fill="${fill}" fill-opacity="${opacity}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opts = "") {
    this.parts.push(
      `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${w.toFixed(2)}" ` +
      `height="${h.toFixed(2)}" fill="${fill}" ${opts}/>`,
    );
  }

  circle(cx: number, cy: number, r: number, fill: string) {
    this.parts.push(`<circle cx="${cx.toFixed(2)}" cy="${cy.toFixed(2)}" r="${r}" fill="${fill}"/>`);
  }

  text(x: number, y: number, content: string, opts = "") {
    this.parts.push(
      `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-family="sans-serif" ${opts}>` +
      `${esc(content)}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

export interface Frame {
  svg: Svg;
  x: (v: number) => number;
  y: (v: number) => number;
  plotLeft: number;
  plotRight: number;
  plotTop: number;
  plotBottom: number;
}

/** Axes, ticks and labels for one panel; returns data-space converters. */
export function frame(
  svg: Svg,
  region: { x0: number; y0: number; x1: number; y1: number },
  xDomain: [number, number],
  yDomain: [number, number],
  labels: { title?: string; xLabel?: string; yLabel?: string; xTicks?: Array<[number, string]> },
): Frame {
  const m: Margin = { top: 28, right: 12, bottom: 40, left: 56 };
  const plotLeft = region.x0 + m.left;
  const plotRight = region.x1 - m.right;
  const plotTop = region.y0 + m.top;
  const plotBottom = region.y1 - m.bottom;
  const x = linearScale(xDomain, [plotLeft, plotRight]);
  const y = linearScale(yDomain, [plotBottom, plotTop]);

  svg.line(plotLeft, plotBottom, plotRight, plotBottom, "#222");
  svg.line(plotLeft, plotTop, plotLeft, plotBottom, "#222");
  if (labels.title) {
    svg.text((plotLeft + plotRight) / 2, region.y0 + 16, labels.title,
      'text-anchor="middle" font-size="13" font-weight="bold"');
  }
  if (labels.xLabel) {
    svg.text((plotLeft + plotRight) / 2, region.y1 - 6, labels.xLabel,
      'text-anchor="middle" font-size="11"');
  }
  if (labels.yLabel) {
    const cx = region.x0 + 14;
    const cy = (plotTop + plotBottom) / 2;
    svg.text(cx, cy, labels.yLabel,
      `text-anchor="middle" font-size="11" transform="rotate(-90 ${cx} ${cy})"`);
  }
  const xTicks = labels.xTicks ??
    niceTicks(xDomain[0], xDomain[1]).map((v) => [v, String(v)] as [number, string]);
  for (const [v, label] of xTicks) {
    const px = x(v);
    svg.line(px, plotBottom, px, plotBottom + 4, "#222");
    svg.text(px, plotBottom + 16, label, 'text-anchor="middle" font-size="10"');
  }
  for (const v of niceTicks(yDomain[0], yDomain[1])) {
    const py = y(v);
    svg.line(plotLeft - 4, py, plotLeft, py, "#222");
    svg.line(plotLeft, py, plotRight, py, "#eee");
    svg.text(plotLeft - 7, py + 3, trimNumber(v), 'text-anchor="end" font-size="10"');
  }
  return { svg, x, y, plotLeft, plotRight, plotTop, plotBottom };
}

export function trimNumber(v: number): string {
  const s = v.toPrecision(6);
  return String(Number(s));
}

export function legend(svg: Svg, entries: Array<[string, string]>, x0: number, y0: number) {
  entries.forEach(([label, color], i) => {
    const y = y0 + i * 16;
    svg.rect(x0, y - 8, 12, 10, color);
    svg.text(x0 + 16, y, label, 'font-size="11"');
  });
}
