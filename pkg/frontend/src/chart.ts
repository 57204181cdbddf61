import { ticks } from "d3-array";
import type { Series } from "./summary.js";

export interface ChartOptions {
  title: string;
  yLabel: string;
  xLabel?: string;
  width?: number;
  height?: number;
}

// matplotlib tab10, enough for the three regimes plus a few spares
const COLORS = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
];

const MARGIN = { top: 58, right: 18, bottom: 46, left: 64 };

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(v: number): string {
  return v.toFixed(2);
}

interface Scale {
  lo: number;
  hi: number;
  apply(v: number): number;
}

function linear(lo: number, hi: number, rangeLo: number, rangeHi: number): Scale {
  const span = hi - lo;
  return {
    lo,
    hi,
    apply: (v) => rangeLo + ((v - lo) / span) * (rangeHi - rangeLo),
  };
}

/** Pad a data extent so flat series still get a visible band of axis. */
function padded(lo: number, hi: number): [number, number] {
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) return [0, 1];
  const span = hi - lo;
  const pad = span === 0 ? Math.max(Math.abs(hi) * 0.1, 0.5) : span * 0.06;
  return [lo - pad, hi + pad];
}

/** Runs of consecutive indices where the series has a value to draw. */
function segments(series: Series, present: (i: number) => boolean): number[][] {
  const out: number[][] = [];
  let current: number[] = [];
  for (let i = 0; i < series.t.length; i++) {
    if (present(i)) {
      current.push(i);
    } else if (current.length > 0) {
      out.push(current);
      current = [];
    }
  }
  if (current.length > 0) out.push(current);
  return out;
}

function linePath(series: Series, x: Scale, y: Scale): string {
  const segs = segments(series, (i) => series.mean[i] !== null);
  return segs
    .map((seg) =>
      seg
        .map((i, k) => `${k === 0 ? "M" : "L"}${fmt(x.apply(series.t[i]))},${fmt(y.apply(series.mean[i]!))}`)
        .join(""),
    )
    .join("");
}

/** Closed band outline per segment: upper edge forward, lower edge back. */
function bandPath(series: Series, x: Scale, y: Scale): string {
  const segs = segments(series, (i) => series.mean[i] !== null && series.std[i] !== null);
  const parts: string[] = [];
  for (const seg of segs) {
    const top = seg.map(
      (i) => `${fmt(x.apply(series.t[i]))},${fmt(y.apply(series.mean[i]! + series.std[i]!))}`,
    );
    const bottom = seg
      .slice()
      .reverse()
      .map((i) => `${fmt(x.apply(series.t[i]))},${fmt(y.apply(series.mean[i]! - series.std[i]!))}`);
    parts.push(`M${top.join("L")}L${bottom.join("L")}Z`);
  }
  return parts.join("");
}

/** Raw mean values for the data-values attribute; gaps stay as empty slots. */
function joinValues(series: Series): string {
  return series.mean.map((v) => (v === null ? "" : String(v))).join(",");
}

export function renderChart(seriesList: Series[], opts: ChartOptions): string {
  const width = opts.width ?? 760;
  const height = opts.height ?? 420;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  let tLo = Infinity;
  let tHi = -Infinity;
  let vLo = Infinity;
  let vHi = -Infinity;
  for (const s of seriesList) {
    for (let i = 0; i < s.t.length; i++) {
      const m = s.mean[i];
      if (m === null) continue;
      const sd = s.std[i] ?? 0;
      tLo = Math.min(tLo, s.t[i]);
      tHi = Math.max(tHi, s.t[i]);
      vLo = Math.min(vLo, m - sd);
      vHi = Math.max(vHi, m + sd);
    }
  }
  if (!Number.isFinite(tLo)) {
    tLo = 0;
    tHi = 1;
  }
  if (tLo === tHi) tHi = tLo + 1;
  const [yLo, yHi] = padded(vLo, vHi);

  const x = linear(tLo, tHi, MARGIN.left, MARGIN.left + plotW);
  const y = linear(yLo, yHi, MARGIN.top + plotH, MARGIN.top);
  const xTicks = ticks(tLo, tHi, Math.min(10, Math.max(2, Math.round(tHi - tLo))));
  const yTicks = ticks(yLo, yHi, 6);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${MARGIN.left}" y="24" font-size="16" font-weight="bold" fill="#222">${escapeXml(opts.title)}</text>`,
  );
  parts.push(
    `<text x="${MARGIN.left}" y="41" font-size="11" fill="#666">mean with ±1 std band across replicates</text>`,
  );

  // axes
  const x0 = MARGIN.left;
  const x1 = MARGIN.left + plotW;
  const yBase = MARGIN.top + plotH;
  for (const tv of yTicks) {
    const yy = fmt(y.apply(tv));
    parts.push(`<line x1="${x0}" y1="${yy}" x2="${x1}" y2="${yy}" stroke="#ddd" stroke-width="1"/>`);
    parts.push(
      `<text x="${x0 - 8}" y="${yy}" font-size="11" fill="#444" text-anchor="end" dominant-baseline="middle">${tv}</text>`,
    );
  }
  for (const tv of xTicks) {
    const xx = fmt(x.apply(tv));
    parts.push(`<line x1="${xx}" y1="${yBase}" x2="${xx}" y2="${yBase + 5}" stroke="#444" stroke-width="1"/>`);
    parts.push(
      `<text x="${xx}" y="${yBase + 18}" font-size="11" fill="#444" text-anchor="middle">${tv}</text>`,
    );
  }
  parts.push(`<line x1="${x0}" y1="${yBase}" x2="${x1}" y2="${yBase}" stroke="#444" stroke-width="1"/>`);
  parts.push(`<line x1="${x0}" y1="${MARGIN.top}" x2="${x0}" y2="${yBase}" stroke="#444" stroke-width="1"/>`);
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${height - 10}" font-size="12" fill="#222" text-anchor="middle">${escapeXml(
      opts.xLabel ?? "period",
    )}</text>`,
  );
  parts.push(
    `<text font-size="12" fill="#222" text-anchor="middle" transform="translate(16,${MARGIN.top + plotH / 2}) rotate(-90)">${escapeXml(
      opts.yLabel,
    )}</text>`,
  );

  // bands first so every mean line stays on top
  seriesList.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    const band = bandPath(s, x, y);
    if (band) {
      parts.push(`<path class="band" d="${band}" fill="${color}" fill-opacity="0.15" stroke="none"/>`);
    }
  });
  seriesList.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    const line = linePath(s, x, y);
    parts.push(
      `<path class="series" data-label="${escapeXml(s.label)}" data-values="${escapeXml(joinValues(s))}" ` +
        `d="${line}" fill="none" stroke="${color}" stroke-width="1.8"/>`,
    );
  });

  // legend, one swatch per series along the top of the plot area
  let legendX = MARGIN.left;
  seriesList.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    const yy = MARGIN.top - 10;
    parts.push(`<rect x="${legendX}" y="${yy - 8}" width="12" height="12" fill="${color}"/>`);
    parts.push(
      `<text x="${legendX + 17}" y="${yy + 2}" font-size="12" fill="#222">${escapeXml(s.label)}</text>`,
    );
    legendX += 17 + 7 * s.label.length + 26;
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
