#!/usr/bin/env node
import { mkdirSync, writeFileSync } from "node:fs";
import { basename, dirname, join } from "node:path";
import { pathToFileURL } from "node:url";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { renderChart } from "./chart.js";
import { PANEL_NAMES, selectPanels } from "./panels.js";
import { extractSeries, readSummary } from "./summary.js";

/** compare trees name the regime directory, so prefer that over "summary". */
export function defaultLabel(path: string): string {
  const dir = basename(dirname(path));
  if (dir && dir !== "." && dir !== "/") return dir;
  return basename(path).replace(/\.[^.]*$/, "");
}

export interface CliArgs {
  inputs: string[];
  labels?: string[];
  panel: string;
  out: string;
}

export function runCli(args: CliArgs): number {
  try {
    const labels = args.labels ?? args.inputs.map(defaultLabel);
    if (labels.length !== args.inputs.length) {
      throw new Error(`got ${args.inputs.length} inputs but ${labels.length} labels`);
    }
    const panels = selectPanels(args.panel);
    const tables = args.inputs.map(readSummary);
    mkdirSync(args.out, { recursive: true });
    for (const panel of panels) {
      const series = tables.map((table, i) =>
        extractSeries(table, labels[i], panel.meanColumn, panel.stdColumn),
      );
      const svg = renderChart(series, panel.chart);
      const path = join(args.out, `${panel.name}.svg`);
      writeFileSync(path, svg, "utf8");
      console.log(`wrote ${path}`);
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

export function main(argv: string[]): number {
  const parsed = yargs(argv)
    .scriptName("coevo-figures")
    .usage("$0 --inputs <summary.csv>... [--labels <name>...] --panel <name>|all --out <dir>")
    .option("inputs", {
      type: "array",
      string: true,
      demandOption: true,
      describe: "ensemble summary CSVs, one per plotted series",
    })
    .option("labels", {
      type: "array",
      string: true,
      describe: "legend names matching --inputs (default: containing directory)",
    })
    .option("panel", {
      type: "string",
      default: "all",
      choices: [...PANEL_NAMES, "all"],
      describe: "which figure to render",
    })
    .option("out", { type: "string", demandOption: true, describe: "output directory" })
    .strict()
    .parseSync();
  return runCli({
    inputs: parsed.inputs,
    labels: parsed.labels,
    panel: parsed.panel,
    out: parsed.out,
  });
}

if (import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(hideBin(process.argv)));
}
