/**
 * The four figure kinds built from metrics tables.
 *
 * convergence        accuracy vs simulated time, one curve per run
 * buffer_log10       log10 of buffered samples vs iteration
 * comm_volume        cumulative floats sent per run, as bars
 * injection_overhead kilobytes injected per iteration
 */

import type { EChartsOption } from "echarts";
import type { MetricsTable } from "./csv.js";

export const PLOT_KINDS = [
  "convergence",
  "buffer_log10",
  "comm_volume",
  "injection_overhead",
] as const;

export type PlotKind = (typeof PLOT_KINDS)[number];

export interface LabeledTable {
  label: string;
  table: MetricsTable;
}

export type Point = [number, number];

export function convergencePoints(table: MetricsTable): Point[] {
  return table.rows
    .filter((row) => row.test_accuracy !== null)
    .map((row) => [row.sim_time_s as number, row.test_accuracy as number]);
}

export function bufferLog10Points(table: MetricsTable): Point[] {
  return table.rows.map((row) => [
    row.iteration as number,
    Math.log10(Math.max(row.buffer_samples_total as number, 1)),
  ]);
}

export function injectionPoints(table: MetricsTable): Point[] {
  return table.rows.map((row) => [
    row.iteration as number,
    (row.injection_bytes as number) / 1024,
  ]);
}

export function finalFloatsSent(table: MetricsTable): number {
  const last = table.rows[table.rows.length - 1];
  return last ? (last.floats_sent_cum as number) : 0;
}

function lineSeries(
  inputs: LabeledTable[],
  extract: (table: MetricsTable) => Point[],
): EChartsOption["series"] {
  return inputs.map(({ label, table }) => ({
    name: label,
    type: "line" as const,
    showSymbol: false,
    data: extract(table),
  }));
}

const AXIS_STYLES = {
  nameLocation: "middle" as const,
  nameGap: 28,
};

export function buildOption(kind: PlotKind, inputs: LabeledTable[]): EChartsOption {
  if (inputs.length === 0) {
    throw new Error("need at least one input CSV");
  }
  const legend = { top: 28, data: inputs.map((i) => i.label) };
  switch (kind) {
    case "convergence":
      return {
        title: { text: "Test accuracy vs simulated time" },
        legend,
        xAxis: { type: "value", name: "simulated time (s)", ...AXIS_STYLES },
        yAxis: { type: "value", name: "top-1 accuracy", max: 1, ...AXIS_STYLES },
        series: lineSeries(inputs, convergencePoints),
      };
    case "buffer_log10":
      return {
        title: { text: "Buffered samples over training (log10)" },
        legend,
        xAxis: { type: "value", name: "iteration", ...AXIS_STYLES },
        yAxis: { type: "value", name: "log10(samples in buffers)", ...AXIS_STYLES },
        series: lineSeries(inputs, bufferLog10Points),
      };
    case "injection_overhead":
      return {
        title: { text: "Injected data per iteration" },
        legend,
        xAxis: { type: "value", name: "iteration", ...AXIS_STYLES },
        yAxis: { type: "value", name: "kilobytes injected", ...AXIS_STYLES },
        series: lineSeries(inputs, injectionPoints),
      };
    case "comm_volume":
      return {
        title: { text: "Cumulative floats communicated" },
        xAxis: { type: "category", data: inputs.map((i) => i.label), name: "run" },
        yAxis: { type: "value", name: "floats sent", ...AXIS_STYLES },
        series: [
          {
            type: "bar",
            data: inputs.map(({ table }) => finalFloatsSent(table)),
            label: { show: true, position: "top" },
          },
        ],
      };
  }
}
