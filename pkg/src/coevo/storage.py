"""File formats and (de)serialization.

Config files are flat YAML key-value documents; tabular data is CSV.
Reals in CSV are written with 17 significant digits so a read-back parses
to the identical float; JSON and YAML rely on Python's shortest
round-trip repr, which carries the same guarantee.

All writers emit "\n" line endings and fixed key orders: identical inputs
must produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import yaml

from .engine import (
    ConfigError,
    MetricsRow,
    Regime,
    RunResult,
    RunStatus,
    SimConfig,
)
from .genomes import GeneEffectTable, MeasureInterval, PolicyEffectSpec, PolicyEffectTable
from .viruses import Mode

METRICS_HEADER = (
    "t",
    "total_viruses",
    "n_strains",
    "mean_virus_r",
    "mean_policy_reduction",
    "mean_effective_r",
    "freq_best_gene",
    "extinct",
    "overflowed",
)

EFFECTS_HEADER = ("name", "ci_low", "ci_high")

SUMMARY_METRICS = (
    "total_viruses",
    "n_strains",
    "mean_virus_r",
    "mean_policy_reduction",
    "mean_effective_r",
    "freq_best_gene",
)

SUMMARY_HEADER = ("t", "n_runs", "n_extinct", "n_overflowed") + tuple(
    f"{name}_{stat}" for name in SUMMARY_METRICS for stat in ("mean", "std")
)


class EffectSpecError(ValueError):
    pass


def format_real(value: float) -> str:
    return format(float(value), ".17g")


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

_INT_FIELDS = (
    "virus_initial_population",
    "virus_size",
    "policy_population_size",
    "policy_size",
    "tmax",
    "population_cap",
    "seed",
)
_REAL_FIELDS = (
    "base_rate",
    "policy_crossover_rate",
    "policy_mutation_rate",
    "virus_mutation_rate",
)


def config_from_mapping(mapping: Mapping, *, source: str = "config") -> SimConfig:
    """Build a config from a flat mapping, collecting every violation.

    Missing fields take defaults; unknown fields are rejected by name; the
    regime's forcing rules and range constraints are checked before
    returning, so a successful parse is a runnable config.
    """
    errors: list[str] = []
    values: dict = {}
    known = set(_INT_FIELDS) | set(_REAL_FIELDS) | {"regime", "mode"}

    for key in mapping:
        if key not in known:
            errors.append(f"{source}: unknown field {key!r}")

    for name in _INT_FIELDS:
        if name not in mapping:
            continue
        raw = mapping[name]
        if isinstance(raw, bool) or not isinstance(raw, int):
            errors.append(f"{source}: field {name!r} must be an integer, got {raw!r}")
        else:
            values[name] = raw
    for name in _REAL_FIELDS:
        if name not in mapping:
            continue
        raw = mapping[name]
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            errors.append(f"{source}: field {name!r} must be a number, got {raw!r}")
        else:
            values[name] = float(raw)
    if "regime" in mapping:
        try:
            values["regime"] = Regime(mapping["regime"])
        except ValueError:
            options = ", ".join(r.value for r in Regime)
            errors.append(f"{source}: regime must be one of {options}, got {mapping['regime']!r}")
    if "mode" in mapping:
        try:
            values["mode"] = Mode(mapping["mode"])
        except ValueError:
            options = ", ".join(m.value for m in Mode)
            errors.append(f"{source}: mode must be one of {options}, got {mapping['mode']!r}")

    # fields that did parse are still range-checked, so one round trip
    # surfaces both kinds of problem at once
    config = SimConfig(**values)
    errors.extend(f"{source}: {v}" for v in config.validate())
    if errors:
        raise ConfigError(errors)
    return config


def parse_config(text: str, *, source: str = "config") -> SimConfig:
    try:
        mapping = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError([f"{where}: {getattr(exc, 'problem', exc)}"]) from exc
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError([f"{source}: expected a flat key-value mapping"])
    return config_from_mapping(mapping, source=source)


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))


def config_to_text(config: SimConfig) -> str:
    return yaml.safe_dump(config.as_mapping(), sort_keys=False)


def save_config(config: SimConfig, path: str | Path) -> None:
    Path(path).write_text(config_to_text(config), encoding="utf-8")


# ---------------------------------------------------------------------------
# Effect spec CSV
# ---------------------------------------------------------------------------


def parse_effect_spec(
    text: str, *, source: str = "effects", expected_count: Optional[int] = None
) -> PolicyEffectSpec:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EffectSpecError(f"{source}: empty file") from None
    if tuple(h.strip() for h in header) != EFFECTS_HEADER:
        raise EffectSpecError(
            f"{source}: header must be {','.join(EFFECTS_HEADER)!r}, got {','.join(header)!r}"
        )

    measures: list[MeasureInterval] = []
    errors: list[str] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            errors.append(f"{source}:{line_no}: expected 3 fields, got {len(row)}")
            continue
        name = row[0].strip()
        try:
            low = float(row[1])
            high = float(row[2])
        except ValueError:
            errors.append(f"{source}:{line_no}: non-numeric interval bounds {row[1]!r},{row[2]!r}")
            continue
        try:
            measures.append(MeasureInterval(name=name, ci_low=low, ci_high=high))
        except ValueError as exc:
            errors.append(f"{source}:{line_no}: {exc}")
    if errors:
        raise EffectSpecError("; ".join(errors))
    if not measures:
        raise EffectSpecError(f"{source}: no measures found")
    if expected_count is not None and len(measures) != expected_count:
        raise EffectSpecError(
            f"{source}: {len(measures)} measures, configuration expects {expected_count}"
        )
    return PolicyEffectSpec(tuple(measures))


def load_effect_spec(path: str | Path, expected_count: Optional[int] = None) -> PolicyEffectSpec:
    path = Path(path)
    if not path.exists():
        raise EffectSpecError(f"effect spec file not found: {path}")
    return parse_effect_spec(
        path.read_text(encoding="utf-8"), source=str(path), expected_count=expected_count
    )


def effect_spec_rows(spec: PolicyEffectSpec) -> list[dict]:
    return [
        {"name": m.name, "ci_low": m.ci_low, "ci_high": m.ci_high} for m in spec.measures
    ]


def effect_spec_from_rows(rows: Sequence[Mapping]) -> PolicyEffectSpec:
    measures = []
    errors = []
    for i, row in enumerate(rows, start=1):
        try:
            measures.append(
                MeasureInterval(
                    name=str(row["name"]),
                    ci_low=float(row["ci_low"]),
                    ci_high=float(row["ci_high"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"measure {i}: {exc}")
    if errors:
        raise EffectSpecError("; ".join(errors))
    if not measures:
        raise EffectSpecError("no measures given")
    return PolicyEffectSpec(tuple(measures))


# ---------------------------------------------------------------------------
# Bundled defaults
# ---------------------------------------------------------------------------


def _data_text(filename: str) -> str:
    return resources.files("coevo").joinpath("data").joinpath(filename).read_text(encoding="utf-8")


def load_default_config() -> SimConfig:
    return parse_config(_data_text("default_config.yaml"), source="bundled default config")


def load_default_effects() -> PolicyEffectSpec:
    """The bundled synthetic measure intervals (placeholder data)."""
    return parse_effect_spec(_data_text("default_effects.csv"), source="bundled default effects")


# ---------------------------------------------------------------------------
# Metrics rows
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_real(value)
    return str(value)


def metrics_to_csv(rows: Sequence[MetricsRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for row in rows:
        writer.writerow(
            [
                row.t,
                row.total_viruses,
                row.n_strains,
                _cell(row.mean_virus_r),
                _cell(row.mean_policy_reduction),
                _cell(row.mean_effective_r),
                _cell(row.freq_best_gene),
                _cell(row.extinct),
                _cell(row.overflowed),
            ]
        )
    return out.getvalue()


def _parse_optional_real(cell: str) -> Optional[float]:
    return None if cell == "" else float(cell)


def metrics_from_csv(text: str, *, source: str = "metrics") -> tuple[MetricsRow, ...]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != METRICS_HEADER:
        raise ValueError(f"{source}: unexpected metrics header {header!r}")
    rows = []
    for record in reader:
        if not record:
            continue
        rows.append(
            MetricsRow(
                t=int(record[0]),
                total_viruses=int(record[1]),
                n_strains=int(record[2]),
                mean_virus_r=_parse_optional_real(record[3]),
                mean_policy_reduction=float(record[4]),
                mean_effective_r=_parse_optional_real(record[5]),
                freq_best_gene=_parse_optional_real(record[6]),
                extinct=record[7] == "true",
                overflowed=record[8] == "true",
            )
        )
    return tuple(rows)


def read_metrics_csv(path: str | Path) -> tuple[MetricsRow, ...]:
    path = Path(path)
    return metrics_from_csv(path.read_text(encoding="utf-8"), source=str(path))


# ---------------------------------------------------------------------------
# Run documents
# ---------------------------------------------------------------------------


def result_to_doc(result: RunResult) -> dict:
    """JSON-ready document carrying everything needed to rebuild the result."""
    return {
        "seed": result.seed,
        "status": {"kind": result.status.kind, "period": result.status.period},
        "status_label": result.status.label(),
        "config": result.config.as_mapping(),
        "gene_effects": list(result.gene_effects.effects),
        "policy_effects": {
            "names": list(result.policy_effects.names),
            "effects": list(result.policy_effects.effects),
            "weights": list(result.policy_effects.weights),
        },
        "rows": [
            {
                "t": row.t,
                "total_viruses": row.total_viruses,
                "n_strains": row.n_strains,
                "mean_virus_r": row.mean_virus_r,
                "mean_policy_reduction": row.mean_policy_reduction,
                "mean_effective_r": row.mean_effective_r,
                "freq_best_gene": row.freq_best_gene,
                "extinct": row.extinct,
                "overflowed": row.overflowed,
            }
            for row in result.rows
        ],
    }


def result_from_doc(doc: Mapping) -> RunResult:
    config = config_from_mapping(doc["config"], source="run document")
    policy = doc["policy_effects"]
    rows = tuple(
        MetricsRow(
            t=int(r["t"]),
            total_viruses=int(r["total_viruses"]),
            n_strains=int(r["n_strains"]),
            mean_virus_r=r["mean_virus_r"],
            mean_policy_reduction=float(r["mean_policy_reduction"]),
            mean_effective_r=r["mean_effective_r"],
            freq_best_gene=r["freq_best_gene"],
            extinct=bool(r["extinct"]),
            overflowed=bool(r["overflowed"]),
        )
        for r in doc["rows"]
    )
    return RunResult(
        config=config,
        seed=int(doc["seed"]),
        gene_effects=GeneEffectTable(tuple(float(e) for e in doc["gene_effects"])),
        policy_effects=PolicyEffectTable(
            names=tuple(str(n) for n in policy["names"]),
            effects=tuple(float(e) for e in policy["effects"]),
            weights=tuple(float(w) for w in policy["weights"]),
        ),
        rows=rows,
        status=RunStatus(doc["status"]["kind"], doc["status"]["period"]),
    )


def doc_to_json(doc: Mapping) -> str:
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Ensemble summaries
# ---------------------------------------------------------------------------


def summarize_ensemble(results: Sequence[RunResult]) -> list[dict]:
    """Per-period cross-replicate means and standard deviations.

    A metric's statistics at period t cover the replicates that recorded a
    value there; once every surviving replicate is extinct the cells stay
    empty (downstream plots break the curve rather than draw zero). The
    deviation is the sample standard deviation (ddof=1), 0.0 for a single
    value.
    """
    if not results:
        return []
    horizon = max(r.rows[-1].t for r in results)
    table: list[dict] = []
    for t in range(horizon + 1):
        rows = [r.rows[t] for r in results if t < len(r.rows)]
        entry: dict = {
            "t": t,
            "n_runs": len(rows),
            "n_extinct": sum(1 for row in rows if row.extinct),
            "n_overflowed": sum(1 for row in rows if row.overflowed),
        }
        for name in SUMMARY_METRICS:
            values = [getattr(row, name) for row in rows]
            values = [v for v in values if v is not None]
            if not values:
                entry[f"{name}_mean"] = None
                entry[f"{name}_std"] = None
            elif all(v == values[0] for v in values):
                # summation rounding must not turn n identical values into
                # anything but that value (and a spread of exactly zero)
                entry[f"{name}_mean"] = float(values[0])
                entry[f"{name}_std"] = 0.0
            else:
                arr = np.asarray(values, dtype=np.float64)
                entry[f"{name}_mean"] = float(arr.mean())
                entry[f"{name}_std"] = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        table.append(entry)
    return table


def summary_to_csv(summary: Sequence[Mapping]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for entry in summary:
        writer.writerow([_cell(entry[column]) for column in SUMMARY_HEADER])
    return out.getvalue()


# ---------------------------------------------------------------------------
# Output trees
# ---------------------------------------------------------------------------


def write_run(result: RunResult, out_dir: str | Path) -> list[Path]:
    """Write one run: metrics.csv + run.json. Returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    doc_path = out / "run.json"
    metrics_path.write_text(metrics_to_csv(result.rows), encoding="utf-8")
    doc_path.write_text(doc_to_json(result_to_doc(result)), encoding="utf-8")
    return [metrics_path, doc_path]


def write_sweep(results: Sequence[RunResult], out_dir: str | Path) -> list[Path]:
    """Write a replicate ensemble: per-seed run directories plus summary.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for result in results:
        written.extend(write_run(result, out / "runs" / f"seed_{result.seed}"))
    summary_path = out / "summary.csv"
    summary_path.write_text(summary_to_csv(summarize_ensemble(results)), encoding="utf-8")
    written.append(summary_path)
    return written


def write_compare(
    by_regime: Mapping[Regime, Sequence[RunResult]],
    seeds: Sequence[int],
    out_dir: str | Path,
) -> list[Path]:
    """Write one sweep tree per regime plus a small manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for regime, results in by_regime.items():
        written.extend(write_sweep(results, out / regime.value))
    manifest = {
        "seeds": list(seeds),
        "regimes": [regime.value for regime in by_regime],
        "summaries": {regime.value: f"{regime.value}/summary.csv" for regime in by_regime},
    }
    manifest_path = out / "compare.json"
    manifest_path.write_text(doc_to_json(manifest), encoding="utf-8")
    written.append(manifest_path)
    return written


@dataclass(frozen=True)
class RunManifest:
    """A resolved plan for a batch of runs: inputs checked before work starts."""

    config_path: Optional[Path]
    effects_path: Optional[Path]
    out_dir: Path
    seeds: tuple[int, ...]
    regimes: tuple[Regime, ...]

    def load_inputs(self) -> tuple[SimConfig, PolicyEffectSpec]:
        config = load_config(self.config_path) if self.config_path else load_default_config()
        if self.effects_path:
            spec = load_effect_spec(self.effects_path, expected_count=config.policy_size)
        else:
            spec = load_default_effects()
        return config, spec
