/**
 * Reading and validating metrics CSVs written by `streamsgd run`.
 *
 * Every value is numeric; empty cells (e.g. test_accuracy on iterations
 * without an evaluation) become null.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

/** Columns every metrics.csv must carry (per-device columns vary by run). */
export const REQUIRED_COLUMNS = [
  "iteration",
  "sim_time_s",
  "epoch",
  "global_batch",
  "lr_used",
  "train_loss",
  "test_accuracy",
  "wait_time_s",
  "buffer_samples_total",
  "buffer_bytes",
  "floats_sent_cum",
  "bytes_sent_cum",
  "cnc_cum",
  "injection_bytes",
  "injection_bytes_cum",
] as const;

export class SchemaError extends Error {}

export interface MetricsTable {
  path: string;
  columns: string[];
  rows: Array<Record<string, number | null>>;
}

export function parseMetricsCsv(text: string, path = "<memory>"): MetricsTable {
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message}`);
  }
  const [header, ...records] = parsed.data;
  if (!header || header.length === 0) {
    throw new SchemaError(`${path}: empty CSV`);
  }
  for (const column of REQUIRED_COLUMNS) {
    if (!header.includes(column)) {
      throw new SchemaError(`${path}: missing column ${column}`);
    }
  }
  const rows = records.map((cells, i) => {
    if (cells.length !== header.length) {
      throw new SchemaError(`${path}: row ${i + 2} has ${cells.length} cells, expected ${header.length}`);
    }
    const row: Record<string, number | null> = {};
    header.forEach((name, col) => {
      const cell = cells[col];
      if (cell === "") {
        row[name] = null;
        return;
      }
      const value = Number(cell);
      if (Number.isNaN(value)) {
        throw new SchemaError(`${path}: non-numeric value ${JSON.stringify(cell)} in column ${name}`);
      }
      row[name] = value;
    });
    return row;
  });
  return { path, columns: header, rows };
}

export function loadMetricsCsv(path: string): MetricsTable {
  return parseMetricsCsv(readFileSync(path, "utf-8"), path);
}

export interface LabeledInput {
  path: string;
  label: string;
}

/** Parses a `path[:label]` CLI argument; the label defaults to the path. */
export function parseInputArg(arg: string): LabeledInput {
  const split = arg.lastIndexOf(":");
  if (split <= 0) {
    return { path: arg, label: arg };
  }
  return { path: arg.slice(0, split), label: arg.slice(split + 1) || arg.slice(0, split) };
}
