import { existsSync, mkdirSync, writeFileSync } from 'fs';
import { join } from 'path';

import { CsvTable, readCsv, requireColumns } from './csv';
import { FigureSpec } from './figures';
import { renderSvg, Series } from './svg';

export interface RenderResult {
  figure: string;
  output: string;
  points: number;
  warning: string | null;
}

function toNumber(value: number | string, file: string, column: string): number {
  if (typeof value === 'number') return value;
  throw new Error(`${file}: non-numeric value '${value}' in column '${column}'`);
}

/** Split rows into one series per distinct group key, preserving first-seen
 * order so colors are stable across reruns. */
function buildSeries(table: CsvTable, spec: FigureSpec): Series[] {
  const groups = new Map<string, Series>();
  for (const row of table.rows) {
    const key = spec.groupBy === null ? '' : String(row[spec.groupBy]);
    let series = groups.get(key);
    if (!series) {
      series = { label: spec.groupBy === null ? '' : `${spec.groupBy}=${key}`, points: [] };
      groups.set(key, series);
    }
    series.points.push({
      x: toNumber(row[spec.x], table.file, spec.x),
      y: toNumber(row[spec.y], table.file, spec.y),
      err: spec.yerr === null ? 0 : toNumber(row[spec.yerr], table.file, spec.yerr),
    });
  }
  return [...groups.values()];
}

export function renderFigure(csvDir: string, outDir: string, spec: FigureSpec): RenderResult {
  const csvPath = join(csvDir, spec.csv);
  if (!existsSync(csvPath)) {
    throw new Error(`${spec.csv}: file not found in ${csvDir}`);
  }
  const table = readCsv(csvPath);
  let warning: string | null = null;
  let series: Series[] = [];
  if (table.rows.length === 0) {
    warning = `${spec.csv}: no data rows; wrote empty plot`;
  } else {
    const needed = [spec.x, spec.y];
    if (spec.yerr !== null) needed.push(spec.yerr);
    if (spec.groupBy !== null) needed.push(spec.groupBy);
    requireColumns(table, needed);
    series = buildSeries(table, spec);
  }
  const svg = renderSvg(spec.title, spec.x, spec.y, spec.xscale, spec.yscale, series);
  mkdirSync(outDir, { recursive: true });
  const output = join(outDir, `${spec.name}.svg`);
  writeFileSync(output, svg + '\n');
  return {
    figure: spec.name,
    output,
    points: series.reduce((acc, s) => acc + s.points.length, 0),
    warning,
  };
}

export function renderAll(csvDir: string, outDir: string, specs: FigureSpec[]): RenderResult[] {
  return specs.map((spec) => renderFigure(csvDir, outDir, spec));
}
