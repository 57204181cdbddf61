"""Top-level run loop coupling the virus and policy populations.

Period order (one serial interval):
  1. compute the policy population's mean reduction,
  2. record the metrics row for period t,
  3. infection step at that reduction (generational replacement),
  4. policy generation step, evaluated against the pre-infection ledger,
so both populations update from the same observed state and row t always
describes the state the policies acted on. Row 0 is the initial condition.

Three regimes share the loop: coevolution (both populations evolve),
policy-only (virus mutation forced to 0), virus-only (policy mutation and
crossover forced to 0, policies stay all-zero).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

from .genomes import (
    GeneEffectTable,
    PolicyEffectSpec,
    PolicyEffectTable,
    draw_gene_effects,
    draw_policy_effects,
)
from .policies import PolicyPopulation, mean_reduction, next_generation
from .rng import RngStream
from .viruses import (
    DEFAULT_POPULATION_CAP,
    Mode,
    PopulationOverflow,
    RateTable,
    ReproductionContext,
    StrainLedger,
    infection_step,
    metrics_of,
)

THREADS_ENV_VAR = "COEVO_THREADS"


class Regime(str, Enum):
    COEVOLUTION = "coevolution"
    POLICY_ONLY = "policy-only"
    VIRUS_ONLY = "virus-only"


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every violation found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class SimConfig:
    virus_initial_population: int = 10
    virus_size: int = 10
    policy_population_size: int = 100
    policy_size: int = 46
    base_rate: float = 2.63
    tmax: int = 20
    policy_crossover_rate: float = 0.5
    policy_mutation_rate: float = 0.05
    virus_mutation_rate: float = 0.0001
    regime: Regime = Regime.COEVOLUTION
    mode: Mode = Mode.STOCHASTIC
    population_cap: int = DEFAULT_POPULATION_CAP
    seed: int = 0

    def normalized(self) -> "SimConfig":
        """Apply the regime's forcing rules (idempotent)."""
        if self.regime is Regime.POLICY_ONLY:
            return replace(self, virus_mutation_rate=0.0)
        if self.regime is Regime.VIRUS_ONLY:
            return replace(self, policy_mutation_rate=0.0, policy_crossover_rate=0.0)
        return self

    def validate(self) -> list[str]:
        """All violations of the normalized config, empty when valid."""
        cfg = self.normalized()
        errors: list[str] = []
        if cfg.virus_initial_population < 1:
            errors.append("virus_initial_population must be >= 1")
        if not 1 <= cfg.virus_size <= 64:
            errors.append("virus_size must be in 1..64")
        if not 1 <= cfg.policy_size <= 64:
            errors.append("policy_size must be in 1..64")
        if cfg.policy_population_size < 2 or cfg.policy_population_size % 2:
            errors.append("policy_population_size must be even and >= 2")
        if not cfg.base_rate > 0:
            errors.append("base_rate must be > 0")
        if cfg.tmax < 0:
            errors.append("tmax must be >= 0")
        for name in ("policy_crossover_rate", "policy_mutation_rate", "virus_mutation_rate"):
            value = getattr(cfg, name)
            if not 0.0 <= value <= 1.0:
                errors.append(f"{name} must lie in [0, 1]")
        if cfg.population_cap < 1:
            errors.append("population_cap must be >= 1")
        if cfg.virus_initial_population > cfg.population_cap:
            errors.append("virus_initial_population exceeds population_cap")
        if cfg.regime is Regime.COEVOLUTION:
            for name in ("virus_mutation_rate", "policy_mutation_rate", "policy_crossover_rate"):
                if getattr(cfg, name) == 0.0:
                    errors.append(f"coevolution regime requires {name} > 0")
        return errors

    def validated(self) -> "SimConfig":
        errors = self.validate()
        if errors:
            raise ConfigError(errors)
        return self.normalized()

    def as_mapping(self) -> dict:
        return {
            "virus_initial_population": self.virus_initial_population,
            "virus_size": self.virus_size,
            "policy_population_size": self.policy_population_size,
            "policy_size": self.policy_size,
            "base_rate": self.base_rate,
            "tmax": self.tmax,
            "policy_crossover_rate": self.policy_crossover_rate,
            "policy_mutation_rate": self.policy_mutation_rate,
            "virus_mutation_rate": self.virus_mutation_rate,
            "regime": self.regime.value,
            "mode": self.mode.value,
            "population_cap": self.population_cap,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class MetricsRow:
    t: int
    total_viruses: int
    n_strains: int
    mean_virus_r: Optional[float]
    mean_policy_reduction: float
    mean_effective_r: Optional[float]
    freq_best_gene: Optional[float]
    extinct: bool
    overflowed: bool


@dataclass(frozen=True)
class RunStatus:
    kind: str  # completed | extinct | overflow
    period: Optional[int] = None

    COMPLETED = "completed"
    EXTINCT = "extinct"
    OVERFLOW = "overflow"

    def label(self) -> str:
        if self.kind == self.COMPLETED:
            return "completed"
        return f"{self.kind}_at({self.period})"


@dataclass(frozen=True)
class RunResult:
    config: SimConfig  # normalized echo
    seed: int
    gene_effects: GeneEffectTable
    policy_effects: PolicyEffectTable
    rows: tuple[MetricsRow, ...]
    status: RunStatus
    # populated only when run(..., snapshot_ledgers=True): ledger state per row
    ledgers: Optional[tuple[StrainLedger, ...]] = field(default=None, compare=False)

    def final_row(self) -> MetricsRow:
        return self.rows[-1]


@dataclass
class RunState:
    config: SimConfig
    ctx: ReproductionContext
    rates: RateTable
    ledger: StrainLedger
    policies: PolicyPopulation
    gene_effects: GeneEffectTable
    policy_effects: PolicyEffectTable
    virus_stream: RngStream
    policy_stream: RngStream


def init_run(config: SimConfig, effect_spec: PolicyEffectSpec, seed: Optional[int] = None) -> RunState:
    """Validate, draw the one-time effect tables, and build period-0 state.

    The master stream fans out into fixed subsystem labels ("tables",
    "virus", "policy"), so the realized effect tables for a seed are the
    same in every regime: regime comparisons on matched seeds are paired.
    """
    cfg = config.validated()
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if len(effect_spec) != cfg.policy_size:
        raise ConfigError(
            [f"effect spec has {len(effect_spec)} measures, config expects {cfg.policy_size}"]
        )

    root = RngStream(cfg.seed)
    tables = root.derive("tables")
    gene_effects = draw_gene_effects(cfg.virus_size, tables.derive("genes"))
    policy_effects = draw_policy_effects(effect_spec, tables.derive("measures"))

    ctx = ReproductionContext(base_rate=cfg.base_rate, gene_effects=gene_effects, mode=cfg.mode)
    return RunState(
        config=cfg,
        ctx=ctx,
        rates=RateTable(ctx),
        ledger=StrainLedger.founders(cfg.virus_size, cfg.virus_initial_population),
        policies=PolicyPopulation.initial(cfg.policy_population_size, policy_effects),
        gene_effects=gene_effects,
        policy_effects=policy_effects,
        virus_stream=root.derive("virus"),
        policy_stream=root.derive("policy"),
    )


def _record(state: RunState, t: int) -> MetricsRow:
    reduction = mean_reduction(state.policies)
    m = metrics_of(state.ledger, state.ctx, reduction, rates=state.rates)
    return MetricsRow(
        t=t,
        total_viruses=m.total,
        n_strains=m.n_strains,
        mean_virus_r=m.mean_rate,
        mean_policy_reduction=reduction,
        mean_effective_r=m.mean_effective_rate,
        freq_best_gene=m.freq_best_gene,
        extinct=m.extinct,
        overflowed=False,
    )


def run(
    config: SimConfig,
    effect_spec: PolicyEffectSpec,
    seed: Optional[int] = None,
    *,
    snapshot_ledgers: bool = False,
) -> RunResult:
    """Run to tmax, extinction, or overflow; rows cover t=0 upward."""
    state = init_run(config, effect_spec, seed)
    cfg = state.config
    rows: list[MetricsRow] = []
    snapshots: list[StrainLedger] = []
    status = RunStatus(RunStatus.COMPLETED)

    for t in range(cfg.tmax + 1):
        row = _record(state, t)
        rows.append(row)
        if snapshot_ledgers:
            snapshots.append(state.ledger)
        if row.extinct:
            status = RunStatus(RunStatus.EXTINCT, t)
            break
        if t == cfg.tmax:
            break

        try:
            offspring = infection_step(
                state.ledger,
                state.ctx,
                row.mean_policy_reduction,
                cfg.virus_mutation_rate,
                state.virus_stream.derive(("period", t)),
                cap=cfg.population_cap,
                rates=state.rates,
            )
        except PopulationOverflow:
            rows[-1] = replace(row, overflowed=True)
            status = RunStatus(RunStatus.OVERFLOW, t)
            break

        state.policies = next_generation(
            state.policies,
            state.ledger,  # pre-infection ledger
            state.ctx,
            cfg.policy_crossover_rate,
            cfg.policy_mutation_rate,
            state.policy_stream.derive(("period", t)),
            rates=state.rates,
        )
        state.ledger = offspring

    return RunResult(
        config=cfg,
        seed=cfg.seed,
        gene_effects=state.gene_effects,
        policy_effects=state.policy_effects,
        rows=tuple(rows),
        status=status,
        ledgers=tuple(snapshots) if snapshot_ledgers else None,
    )


def worker_count() -> int:
    """Worker cap from COEVO_THREADS, default machine parallelism."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ConfigError([f"{THREADS_ENV_VAR} must be an integer, got {raw!r}"]) from exc
        if value < 1:
            raise ConfigError([f"{THREADS_ENV_VAR} must be >= 1, got {value}"])
        return value
    return os.cpu_count() or 1


def run_replicates(
    config: SimConfig,
    effect_spec: PolicyEffectSpec,
    seeds: Sequence[int],
    *,
    max_workers: Optional[int] = None,
) -> list[RunResult]:
    """Independent replicates, one per seed, results in input order.

    Replicates share nothing mutable, so scheduling cannot change any
    result: N workers and 1 worker produce identical lists.
    """
    if len(set(seeds)) != len(seeds):
        raise ConfigError(["replicate seeds must be distinct"])
    workers = max_workers if max_workers is not None else worker_count()
    if workers <= 1 or len(seeds) <= 1:
        return [run(config, effect_spec, seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run(config, effect_spec, s), seeds))


ALL_REGIMES = (Regime.COEVOLUTION, Regime.POLICY_ONLY, Regime.VIRUS_ONLY)


def compare_regimes(
    config: SimConfig,
    effect_spec: PolicyEffectSpec,
    seeds: Sequence[int],
    regimes: Sequence[Regime] = ALL_REGIMES,
    *,
    max_workers: Optional[int] = None,
) -> dict[Regime, list[RunResult]]:
    """Run every regime on the same seed list (paired comparisons)."""
    out: dict[Regime, list[RunResult]] = {}
    for regime in regimes:
        cfg = replace(config, regime=regime)
        out[regime] = run_replicates(cfg, effect_spec, seeds, max_workers=max_workers)
    return out
