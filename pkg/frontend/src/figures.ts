import { readFileSync } from 'fs';

export type Scale = 'linear' | 'log';

/** One figure: which CSV, which columns, how to split series, which axes. */
export interface FigureSpec {
  /** output file stem; the renderer writes `<name>.svg` */
  name: string;
  csv: string;
  x: string;
  y: string;
  /** error-bar column; null only for table-like CSVs without replica stats */
  yerr: string | null;
  groupBy: string | null;
  xscale: Scale;
  yscale: Scale;
  title: string;
}

function asScale(value: unknown, path: string): Scale {
  if (value === undefined || value === null) return 'linear';
  if (value === 'linear' || value === 'log') return value;
  throw new Error(`${path}: scale must be 'linear' or 'log'`);
}

function asString(value: unknown, path: string): string {
  if (typeof value !== 'string' || value.length === 0) {
    throw new Error(`${path}: expected a non-empty string`);
  }
  return value;
}

const KNOWN_KEYS = new Set([
  'name',
  'csv',
  'x',
  'y',
  'yerr',
  'group_by',
  'xscale',
  'yscale',
  'title',
]);

export function parseFigureSpecs(raw: unknown, source: string): FigureSpec[] {
  if (!Array.isArray(raw) || raw.length === 0) {
    throw new Error(`${source}: figure spec must be a non-empty JSON array`);
  }
  return raw.map((entry, i) => {
    const path = `${source}[${i}]`;
    if (typeof entry !== 'object' || entry === null || Array.isArray(entry)) {
      throw new Error(`${path}: each figure must be an object`);
    }
    const obj = entry as Record<string, unknown>;
    for (const key of Object.keys(obj)) {
      if (!KNOWN_KEYS.has(key)) throw new Error(`${path}.${key}: unknown key`);
    }
    const name = asString(obj.name, `${path}.name`);
    const spec: FigureSpec = {
      name,
      csv: asString(obj.csv, `${path}.csv`),
      x: asString(obj.x, `${path}.x`),
      y: asString(obj.y, `${path}.y`),
      yerr:
        obj.yerr === null ? null : obj.yerr === undefined ? 'stderr' : asString(obj.yerr, `${path}.yerr`),
      groupBy: obj.group_by === undefined || obj.group_by === null ? null : asString(obj.group_by, `${path}.group_by`),
      xscale: asScale(obj.xscale, `${path}.xscale`),
      yscale: asScale(obj.yscale, `${path}.yscale`),
      title: obj.title === undefined ? name : asString(obj.title, `${path}.title`),
    };
    return spec;
  });
}

export function loadFigureSpecs(path: string): FigureSpec[] {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, 'utf8'));
  } catch (err) {
    throw new Error(`${path}: ${(err as Error).message}`);
  }
  return parseFigureSpecs(raw, path);
}
