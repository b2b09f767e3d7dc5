export {
  loadMetricsCsv,
  parseMetricsCsv,
  parseInputArg,
  SchemaError,
  REQUIRED_COLUMNS,
} from "./csv.js";
export type { MetricsTable, LabeledInput } from "./csv.js";
export {
  buildOption,
  convergencePoints,
  bufferLog10Points,
  injectionPoints,
  finalFloatsSent,
  PLOT_KINDS,
} from "./plots.js";
export type { LabeledTable, PlotKind, Point } from "./plots.js";
export { chartToSvg, writeChart, DEFAULT_SIZE } from "./render.js";
