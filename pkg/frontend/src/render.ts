/** Headless chart rendering: SVG via echarts SSR, PNG via resvg. */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname, extname } from "node:path";
import * as echarts from "echarts";
import type { EChartsOption } from "echarts";

export interface RenderSize {
  width: number;
  height: number;
}

export const DEFAULT_SIZE: RenderSize = { width: 900, height: 560 };

export function chartToSvg(option: EChartsOption, size: RenderSize = DEFAULT_SIZE): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: size.width,
    height: size.height,
  });
  try {
    chart.setOption({ animation: false, backgroundColor: "#ffffff", ...option });
    // Process-global instance and class counters leak into CSS class names;
    // renumber them so identical inputs produce byte-identical files.
    return normalizeClassIds(chart.renderToSVGString());
  } finally {
    chart.dispose();
  }
}

function normalizeClassIds(svg: string): string {
  const seen = new Map<string, number>();
  return svg
    .replace(/zr\d+-/g, "zr-") // instance counter in clip-path ids and classes
    .replace(/zr-cls-(\d+)/g, (_, id: string) => {
      if (!seen.has(id)) {
        seen.set(id, seen.size);
      }
      return `zr-cls-${seen.get(id)}`;
    });
}

/** Writes the chart to `outPath`; the extension picks vector (.svg) or raster (.png). */
export async function writeChart(
  option: EChartsOption,
  outPath: string,
  size: RenderSize = DEFAULT_SIZE,
): Promise<void> {
  const svg = chartToSvg(option, size);
  mkdirSync(dirname(outPath), { recursive: true });
  const ext = extname(outPath).toLowerCase();
  if (ext === ".svg") {
    writeFileSync(outPath, svg);
    return;
  }
  if (ext === ".png") {
    const { Resvg } = await import("@resvg/resvg-js");
    const png = new Resvg(svg, { fitTo: { mode: "width", value: size.width } })
      .render()
      .asPng();
    writeFileSync(outPath, png);
    return;
  }
  throw new Error(`unsupported output extension ${ext || "(none)"}; use .svg or .png`);
}
