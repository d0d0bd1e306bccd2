import { readFileSync } from 'fs';
import { basename } from 'path';

/** One pep-lab CSV: a `# manifest=...` comment line, a header row, then
 * comma-separated rows without quoting. Numeric cells are parsed to
 * numbers; empty cells stay empty strings. */
export interface CsvTable {
  file: string;
  manifest: string | null;
  columns: string[];
  rows: Record<string, number | string>[];
}

export class MissingColumnError extends Error {
  constructor(public file: string, public column: string) {
    super(`${file}: missing column '${column}'`);
  }
}

export function parseCsv(text: string, file: string): CsvTable {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  let manifest: string | null = null;
  let headerIdx = 0;
  while (headerIdx < lines.length && lines[headerIdx].startsWith('#')) {
    const m = lines[headerIdx].match(/^#\s*manifest=(\S+)/);
    if (m) manifest = m[1];
    headerIdx += 1;
  }
  if (headerIdx >= lines.length) {
    return { file, manifest, columns: [], rows: [] };
  }
  const columns = lines[headerIdx].split(',');
  const rows: Record<string, number | string>[] = [];
  for (const line of lines.slice(headerIdx + 1)) {
    const cells = line.split(',');
    const row: Record<string, number | string> = {};
    columns.forEach((col, i) => {
      const cell = cells[i] ?? '';
      const num = Number(cell);
      row[col] = cell !== '' && Number.isFinite(num) ? num : cell;
    });
    rows.push(row);
  }
  return { file, manifest, columns, rows };
}

export function readCsv(path: string): CsvTable {
  return parseCsv(readFileSync(path, 'utf8'), basename(path));
}

export function requireColumns(table: CsvTable, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new MissingColumnError(table.file, name);
    }
  }
}
