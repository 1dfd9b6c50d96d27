/** plot --csv <path> --figure <kind> [filters] --out <path>
 *
 * Renders one figure from a sweep results CSV and writes the plotted
 * aggregates next to it as `<out>.aggregates.csv`.
 */

import { readFileSync, writeFileSync } from "node:fs";
import process from "node:process";

import { aggregatesToCsv } from "./aggregate.js";
import { SchemaError, parseResultsCsv } from "./csv.js";
import { FIGURE_KINDS, FigureKind, FigureSpec, FilterError, render } from "./figures.js";

const USAGE = `usage: causalstack-plot plot --csv <results.csv> --figure <kind> --out <figure.svg>
  [--metric <name>] [--graph <type>] [--n <int>]
  [--train-samples <size>] [--adapt-size <size>] [--adapt-method <name>]

figure kinds: ${FIGURE_KINDS.join(", ")}
Writes the SVG plus <out>.aggregates.csv with the plotted mean/std values.`;

function parseArgs(argv: string[]): { csv: string; out: string; spec: FigureSpec } {
  const args = [...argv];
  if (args[0] === "plot") {
    args.shift();
  }
  const opts = new Map<string, string>();
  for (let i = 0; i < args.length; i += 2) {
    const key = args[i];
    if (!key.startsWith("--") || i + 1 >= args.length) {
      throw new Error(`malformed arguments near "${key}"\n${USAGE}`);
    }
    opts.set(key.slice(2), args[i + 1]);
  }
  for (const name of ["csv", "figure", "out"]) {
    if (!opts.has(name)) {
      throw new Error(`missing required --${name}\n${USAGE}`);
    }
  }
  const figure = opts.get("figure")! as FigureKind;
  if (!FIGURE_KINDS.includes(figure)) {
    throw new Error(`unknown figure "${figure}"; expected one of ${FIGURE_KINDS.join(", ")}`);
  }
  const spec: FigureSpec = { figure };
  if (opts.has("metric")) spec.metric = opts.get("metric");
  if (opts.has("graph")) spec.graph = opts.get("graph");
  if (opts.has("n")) spec.n = Number(opts.get("n"));
  if (opts.has("train-samples")) spec.trainSamples = opts.get("train-samples");
  if (opts.has("adapt-size")) spec.adaptSize = opts.get("adapt-size");
  if (opts.has("adapt-method")) spec.adaptMethod = opts.get("adapt-method");
  return { csv: opts.get("csv")!, out: opts.get("out")!, spec };
}

export function main(argv: string[]): number {
  try {
    const { csv, out, spec } = parseArgs(argv);
    const rows = parseResultsCsv(readFileSync(csv, "utf8"));
    const figure = render(rows, spec);
    writeFileSync(out, figure.svg);
    const sidecar = `${out}.aggregates.csv`;
    writeFileSync(sidecar, aggregatesToCsv(figure.aggregates));
    console.log(`wrote ${out} and ${sidecar} (${figure.aggregates.length} aggregate rows)`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof FilterError) {
      console.error(`error: ${(err as Error).message}`);
    } else {
      console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    }
    return 1;
  }
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
