import { readFileSync } from "node:fs";
import Papa from "papaparse";

/** One regime's curve on a panel: per-period mean with a ±1 std band. */
export interface Series {
  label: string;
  t: number[];
  mean: Array<number | null>;
  std: Array<number | null>;
}

/** Parsed ensemble summary: the period column plus every metric column. */
export interface SummaryTable {
  source: string;
  t: number[];
  columns: Map<string, Array<number | null>>;
}

function toCell(raw: unknown, source: string, column: string, row: number): number | null {
  if (raw === null || raw === undefined || raw === "") return null;
  if (typeof raw === "number" && Number.isFinite(raw)) return raw;
  throw new Error(`${source}: row ${row}, column ${column}: not a number: ${String(raw)}`);
}

export function parseSummary(text: string, source = "<string>"): SummaryTable {
  const parsed = Papa.parse<Record<string, unknown>>(text, {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new Error(`${source}: ${first.message} (row ${first.row ?? "?"})`);
  }
  const fields = parsed.meta.fields ?? [];
  if (!fields.includes("t")) {
    throw new Error(`${source}: missing required column t (header: ${fields.join(",")})`);
  }
  if (parsed.data.length === 0) {
    throw new Error(`${source}: no data rows`);
  }
  const columns = new Map<string, Array<number | null>>();
  for (const field of fields) {
    if (field !== "t") columns.set(field, []);
  }
  const t: number[] = [];
  parsed.data.forEach((record, i) => {
    const period = toCell(record["t"], source, "t", i + 2);
    if (period === null) {
      throw new Error(`${source}: row ${i + 2}: empty t cell`);
    }
    t.push(period);
    for (const field of fields) {
      if (field === "t") continue;
      columns.get(field)!.push(toCell(record[field], source, field, i + 2));
    }
  });
  return { source, t, columns };
}

export function readSummary(path: string): SummaryTable {
  return parseSummary(readFileSync(path, "utf8"), path);
}

/** Pull one mean/std column pair out as a plottable series. */
export function extractSeries(
  table: SummaryTable,
  label: string,
  meanColumn: string,
  stdColumn: string,
): Series {
  const mean = table.columns.get(meanColumn);
  const std = table.columns.get(stdColumn);
  if (!mean) throw new Error(`${table.source}: missing column ${meanColumn}`);
  if (!std) throw new Error(`${table.source}: missing column ${stdColumn}`);
  return { label, t: table.t, mean, std };
}
