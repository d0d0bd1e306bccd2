#!/usr/bin/env node
/** plots render --in <csv dir> --spec <figures.json> --out <dir>
 *
 * Exit codes: 0 all figures rendered with data, 1 at least one empty-plot
 * warning, 2 usage/spec/schema error (missing file, missing column, bad
 * figure spec).
 */

import { loadFigureSpecs } from './figures';
import { renderAll } from './render';

function parseArgs(argv: string[]): { in: string; spec: string; out: string } {
  if (argv[0] !== 'render') {
    throw new Error(`unknown command '${argv[0] ?? ''}'; usage: plots render --in <dir> --spec <file> --out <dir>`);
  }
  const opts: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const val = argv[i + 1];
    if (!key.startsWith('--') || val === undefined) {
      throw new Error(`malformed arguments near '${key}'`);
    }
    opts[key.slice(2)] = val;
  }
  for (const key of ['in', 'spec', 'out']) {
    if (!(key in opts)) throw new Error(`missing required option --${key}`);
  }
  const unknown = Object.keys(opts).filter((k) => !['in', 'spec', 'out'].includes(k));
  if (unknown.length > 0) throw new Error(`unknown option --${unknown[0]}`);
  return { in: opts.in, spec: opts.spec, out: opts.out };
}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const specs = loadFigureSpecs(args.spec);
    const results = renderAll(args.in, args.out, specs);
    let warned = false;
    for (const res of results) {
      if (res.warning) {
        warned = true;
        console.error(`warning: ${res.warning}`);
      }
      console.log(`${res.figure}: ${res.output} (${res.points} points)`);
    }
    return warned ? 1 : 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
