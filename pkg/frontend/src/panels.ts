import type { ChartOptions } from "./chart.js";

/** Maps one output figure onto a mean/std column pair of the summary CSV. */
export interface PanelSpec {
  name: string;
  meanColumn: string;
  stdColumn: string;
  chart: Pick<ChartOptions, "title" | "yLabel">;
}

export const PANELS: readonly PanelSpec[] = [
  {
    name: "virus_r",
    meanColumn: "mean_virus_r_mean",
    stdColumn: "mean_virus_r_std",
    chart: { title: "Virus reproduction rate", yLabel: "mean intrinsic rate" },
  },
  {
    name: "policy_impact",
    meanColumn: "mean_policy_reduction_mean",
    stdColumn: "mean_policy_reduction_std",
    chart: { title: "Policy impact", yLabel: "mean rate reduction" },
  },
  {
    name: "diversity",
    meanColumn: "n_strains_mean",
    stdColumn: "n_strains_std",
    chart: { title: "Strain diversity", yLabel: "distinct strains" },
  },
  {
    name: "best_gene_freq",
    meanColumn: "freq_best_gene_mean",
    stdColumn: "freq_best_gene_std",
    chart: { title: "Strongest-gene frequency", yLabel: "share of population" },
  },
  {
    name: "effective_r",
    meanColumn: "mean_effective_r_mean",
    stdColumn: "mean_effective_r_std",
    chart: { title: "Effective reproduction rate", yLabel: "mean rate after reductions" },
  },
];

export const PANEL_NAMES = PANELS.map((p) => p.name);

export function selectPanels(name: string): readonly PanelSpec[] {
  if (name === "all") return PANELS;
  const panel = PANELS.find((p) => p.name === name);
  if (!panel) {
    throw new Error(`unknown panel ${name} (expected one of ${[...PANEL_NAMES, "all"].join(", ")})`);
  }
  return [panel];
}
