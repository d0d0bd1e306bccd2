import { Scale } from './figures';

const WIDTH = 720;
const HEIGHT = 460;
const MARGIN = { left: 78, right: 24, top: 44, bottom: 56 };

const PALETTE = [
  '#1f77b4',
  '#d62728',
  '#2ca02c',
  '#9467bd',
  '#ff7f0e',
  '#8c564b',
  '#17becf',
  '#7f7f7f',
];

export interface SeriesPoint {
  x: number;
  y: number;
  err: number;
}

export interface Series {
  label: string;
  points: SeriesPoint[];
}

interface Axis {
  scale: Scale;
  min: number;
  max: number;
}

function fmtTick(v: number): string {
  if (v === 0) return '0';
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0).replace('+', '');
  return Number(v.toPrecision(4)).toString();
}

function niceLinearTicks(min: number, max: number, count = 5): number[] {
  if (min === max) {
    return [min];
  }
  const span = max - min;
  const step0 = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  let step = mag;
  for (const mult of [1, 2, 5, 10]) {
    if (step0 <= mult * mag) {
      step = mult * mag;
      break;
    }
  }
  const out: number[] = [];
  for (let v = Math.ceil(min / step) * step; v <= max + 1e-12 * span; v += step) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

function logTicks(min: number, max: number): number[] {
  const decades: number[] = [];
  const lo = Math.floor(Math.log10(min));
  const hi = Math.ceil(Math.log10(max));
  for (let e = lo; e <= hi; e++) {
    const v = Math.pow(10, e);
    if (v >= min / 1.0001 && v <= max * 1.0001) decades.push(v);
  }
  if (decades.length >= 2) return decades;
  const out: number[] = [];
  for (let e = lo; e <= hi; e++) {
    for (const m of [1, 2, 5]) {
      const v = m * Math.pow(10, e);
      if (v >= min / 1.0001 && v <= max * 1.0001) out.push(v);
    }
  }
  return out.length >= 2 ? out : [min, max];
}

function project(v: number, axis: Axis, lo: number, hi: number): number {
  let t: number;
  if (axis.scale === 'log') {
    t = (Math.log(v) - Math.log(axis.min)) / (Math.log(axis.max) - Math.log(axis.min));
  } else {
    t = (v - axis.min) / (axis.max - axis.min);
  }
  return lo + t * (hi - lo);
}

function axisRange(values: number[], scale: Scale): Axis {
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (scale === 'log') {
    if (min === max) {
      min /= 2;
      max *= 2;
    } else {
      min /= 1.3;
      max *= 1.3;
    }
  } else {
    if (min === max) {
      min -= 1;
      max += 1;
    } else {
      const pad = 0.07 * (max - min);
      min -= pad;
      max += pad;
    }
  }
  return { scale, min, max };
}

const esc = (s: string) => s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');

/** Deterministic standalone SVG: axes, ticks, one polyline + markers +
 * vertical error bars per series, and a legend. */
export function renderSvg(
  title: string,
  xLabel: string,
  yLabel: string,
  xscale: Scale,
  yscale: Scale,
  series: Series[],
): string {
  const plotted = series.map((s) => ({
    label: s.label,
    points: s.points.filter(
      (p) =>
        Number.isFinite(p.x) &&
        Number.isFinite(p.y) &&
        (xscale !== 'log' || p.x > 0) &&
        (yscale !== 'log' || p.y > 0),
    ),
  }));
  const xs = plotted.flatMap((s) => s.points.map((p) => p.x));
  const ys = plotted.flatMap((s) =>
    s.points.flatMap((p) => {
      const lo = p.y - p.err;
      return yscale === 'log' ? [p.y, lo > 0 ? lo : p.y, p.y + p.err] : [p.y - p.err, p.y + p.err];
    }),
  );
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="16">${esc(title)}</text>`,
  );

  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;

  if (xs.length === 0) {
    parts.push(
      `<text x="${WIDTH / 2}" y="${HEIGHT / 2}" text-anchor="middle" font-size="14" fill="#888">no data</text>`,
    );
    parts.push('</svg>');
    return parts.join('\n');
  }

  const xAxis = axisRange(xs, xscale);
  const yAxis = axisRange(ys, yscale);
  const px = (v: number) => project(v, xAxis, x0, x1);
  const py = (v: number) => project(v, yAxis, y0, y1);

  const xticks = xscale === 'log' ? logTicks(xAxis.min, xAxis.max) : niceLinearTicks(xAxis.min, xAxis.max);
  const yticks = yscale === 'log' ? logTicks(yAxis.min, yAxis.max) : niceLinearTicks(yAxis.min, yAxis.max);
  for (const t of xticks) {
    const x = px(t);
    parts.push(`<line x1="${x.toFixed(2)}" y1="${y0}" x2="${x.toFixed(2)}" y2="${y1}" stroke="#eee"/>`);
    parts.push(`<line x1="${x.toFixed(2)}" y1="${y0}" x2="${x.toFixed(2)}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${x.toFixed(2)}" y="${y0 + 20}" text-anchor="middle" font-size="11">${fmtTick(t)}</text>`,
    );
  }
  for (const t of yticks) {
    const y = py(t);
    parts.push(`<line x1="${x0}" y1="${y.toFixed(2)}" x2="${x1}" y2="${y.toFixed(2)}" stroke="#eee"/>`);
    parts.push(`<line x1="${x0 - 5}" y1="${y.toFixed(2)}" x2="${x0}" y2="${y.toFixed(2)}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 9}" y="${(y + 4).toFixed(2)}" text-anchor="end" font-size="11">${fmtTick(t)}</text>`,
    );
  }
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 14}" text-anchor="middle" font-size="13">${esc(xLabel)}${xscale === 'log' ? ' (log)' : ''}</text>`,
  );
  parts.push(
    `<text x="20" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 20 ${(y0 + y1) / 2})">${esc(yLabel)}${yscale === 'log' ? ' (log)' : ''}</text>`,
  );

  plotted.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const sorted = [...s.points].sort((a, b) => a.x - b.x);
    const path = sorted
      .map((p, i) => `${i === 0 ? 'M' : 'L'}${px(p.x).toFixed(2)},${py(p.y).toFixed(2)}`)
      .join(' ');
    if (sorted.length > 1) {
      parts.push(`<path d="${path}" fill="none" stroke="${color}" stroke-width="1.6"/>`);
    }
    for (const p of sorted) {
      const cx = px(p.x);
      const cy = py(p.y);
      if (p.err > 0) {
        let lo = p.y - p.err;
        if (yscale === 'log' && lo <= 0) lo = yAxis.min;
        const yLo = py(lo);
        const yHi = py(p.y + p.err);
        parts.push(
          `<line class="errorbar" x1="${cx.toFixed(2)}" y1="${yLo.toFixed(2)}" x2="${cx.toFixed(2)}" y2="${yHi.toFixed(2)}" stroke="${color}" stroke-width="1.2"/>`,
        );
        for (const ye of [yLo, yHi]) {
          parts.push(
            `<line class="errorbar-cap" x1="${(cx - 3.5).toFixed(2)}" y1="${ye.toFixed(2)}" x2="${(cx + 3.5).toFixed(2)}" y2="${ye.toFixed(2)}" stroke="${color}" stroke-width="1.2"/>`,
          );
        }
      }
      parts.push(
        `<circle cx="${cx.toFixed(2)}" cy="${cy.toFixed(2)}" r="3" fill="${color}"/>`,
      );
    }
  });

  if (plotted.length > 1 || plotted[0]?.label) {
    plotted.forEach((s, si) => {
      const color = PALETTE[si % PALETTE.length];
      const ly = y1 + 14 + 16 * si;
      parts.push(`<rect x="${x1 - 150}" y="${ly - 9}" width="10" height="10" fill="${color}"/>`);
      parts.push(`<text x="${x1 - 135}" y="${ly}" font-size="12">${esc(s.label)}</text>`);
    });
  }
  parts.push('</svg>');
  return parts.join('\n');
}
