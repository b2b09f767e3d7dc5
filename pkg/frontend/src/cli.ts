#!/usr/bin/env node
/**
 * plot <kind> --csv path[:label]... --out file [--width N] [--height N]
 *
 * Kinds: convergence, buffer_log10, comm_volume, injection_overhead.
 * The output extension picks the format: .svg (vector) or .png (raster).
 */

import { pathToFileURL } from "node:url";
import { loadMetricsCsv, parseInputArg, SchemaError } from "./csv.js";
import { buildOption, PLOT_KINDS, type LabeledTable, type PlotKind } from "./plots.js";
import { DEFAULT_SIZE, writeChart } from "./render.js";

const USAGE =
  "usage: plot <kind> --csv path[:label] [--csv ...] --out file [--width N] [--height N]\n" +
  `kinds: ${PLOT_KINDS.join(", ")}`;

interface Args {
  kind: PlotKind;
  inputs: Array<{ path: string; label: string }>;
  out: string;
  width: number;
  height: number;
}

function parseArgs(argv: string[]): Args {
  const [kind, ...rest] = argv;
  if (!kind || !(PLOT_KINDS as readonly string[]).includes(kind)) {
    throw new Error(`expected a plot kind, got ${JSON.stringify(kind ?? null)}\n${USAGE}`);
  }
  const inputs: Args["inputs"] = [];
  let out: string | undefined;
  let width = DEFAULT_SIZE.width;
  let height = DEFAULT_SIZE.height;
  for (let i = 0; i < rest.length; i += 1) {
    const flag = rest[i];
    const value = rest[i + 1];
    if (value === undefined) {
      throw new Error(`missing value for ${flag}\n${USAGE}`);
    }
    switch (flag) {
      case "--csv":
        inputs.push(parseInputArg(value));
        break;
      case "--out":
        out = value;
        break;
      case "--width":
        width = Number(value);
        break;
      case "--height":
        height = Number(value);
        break;
      default:
        throw new Error(`unknown flag ${flag}\n${USAGE}`);
    }
    i += 1;
  }
  if (inputs.length === 0 || !out) {
    throw new Error(`need at least one --csv and an --out path\n${USAGE}`);
  }
  if (!Number.isFinite(width) || !Number.isFinite(height) || width <= 0 || height <= 0) {
    throw new Error("width and height must be positive numbers");
  }
  return { kind: kind as PlotKind, inputs, out, width, height };
}

export async function main(argv: string[]): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  try {
    const tables: LabeledTable[] = args.inputs.map(({ path, label }) => ({
      label,
      table: loadMetricsCsv(path),
    }));
    await writeChart(buildOption(args.kind, tables), args.out, {
      width: args.width,
      height: args.height,
    });
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema mismatch: ${err.message}`);
    } else {
      console.error((err as Error).message);
    }
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;

if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
