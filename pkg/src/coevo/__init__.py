"""Coupled evolution of a virus population and a policy portfolio.

Two populations adapt against each other through a shared infection
process: binary virus genomes accumulate mutations that shift their
reproduction rate, while a genetic algorithm over binary activation
vectors searches for measure combinations that suppress it. The virus
side is tracked as strain counts rather than individuals, so population
sizes up to the configured cap (default 10^10) stay cheap.

Everything is deterministic given a seed: replicates, worker counts, and
client/server transports all reproduce byte-identical outputs.
"""

from .engine import (
    ALL_REGIMES,
    ConfigError,
    MetricsRow,
    Regime,
    RunResult,
    RunStatus,
    SimConfig,
    compare_regimes,
    init_run,
    run,
    run_replicates,
)
from .genomes import (
    GeneEffectTable,
    MeasureInterval,
    PolicyEffectSpec,
    PolicyEffectTable,
    draw_gene_effects,
    draw_policy_effects,
    flip_bit,
    genome_from_str,
    genome_to_str,
    single_point_crossover,
)
from .policies import PolicyIndividual, PolicyPopulation, mean_reduction, policy_fitness
from .rng import RngStream
from .viruses import (
    Mode,
    PopulationOverflow,
    ReproductionContext,
    StrainLedger,
    effective_rate,
    infection_step,
    metrics_of,
    offspring_count,
    reference_infection_step,
    virus_rate,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_REGIMES",
    "ConfigError",
    "GeneEffectTable",
    "MeasureInterval",
    "MetricsRow",
    "Mode",
    "PolicyEffectSpec",
    "PolicyEffectTable",
    "PolicyIndividual",
    "PolicyPopulation",
    "PopulationOverflow",
    "Regime",
    "ReproductionContext",
    "RngStream",
    "RunResult",
    "RunStatus",
    "SimConfig",
    "StrainLedger",
    "__version__",
    "compare_regimes",
    "draw_gene_effects",
    "draw_policy_effects",
    "effective_rate",
    "flip_bit",
    "genome_from_str",
    "genome_to_str",
    "infection_step",
    "init_run",
    "mean_reduction",
    "metrics_of",
    "offspring_count",
    "policy_fitness",
    "reference_infection_step",
    "run",
    "run_replicates",
    "single_point_crossover",
    "virus_rate",
]
