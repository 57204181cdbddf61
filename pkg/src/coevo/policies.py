"""The policy genetic algorithm.

Policies are bit vectors over the measure set, scored against viruses
sampled from the live ledger, and reproduced by roulette-wheel selection,
single-point crossover, and 0-to-1 mutation (activated measures never
revert). Each generation fully replaces the previous one and keeps the
population size constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .genomes import PolicyEffectTable, single_point_crossover
from .rng import RngStream
from .viruses import RateTable, ReproductionContext, StrainLedger


@dataclass(frozen=True)
class PolicyIndividual:
    """A policy genome with its cached total reduction.

    The cache is maintained by construction: every code path that makes a
    genome goes through the effect table, so ``reduction`` always equals
    the recomputed weighted sum.
    """

    bits: int
    reduction: float


@dataclass(frozen=True)
class PolicyPopulation:
    members: tuple[PolicyIndividual, ...]
    table: PolicyEffectTable

    def __post_init__(self):
        if not self.members:
            raise ValueError("policy population must be nonempty")
        if len(self.members) % 2:
            raise ValueError(f"policy population size must be even, got {len(self.members)}")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def genome_length(self) -> int:
        return len(self.table)

    @classmethod
    def initial(cls, size: int, table: PolicyEffectTable) -> "PolicyPopulation":
        """All-zero policies: government starts with no measure at all."""
        zero = PolicyIndividual(bits=0, reduction=table.reduction_of(0))
        return cls(members=(zero,) * size, table=table)

    def spawn(self, bits: int) -> PolicyIndividual:
        return PolicyIndividual(bits=bits, reduction=self.table.reduction_of(bits))


def mean_reduction(pop: PolicyPopulation) -> float:
    return sum(member.reduction for member in pop.members) / len(pop)


@dataclass(frozen=True)
class LedgerView:
    """Sorted-strain arrays for fast count-weighted individual sampling."""

    cumulative: np.ndarray  # inclusive cumsum of counts, sorted-key order
    rates: np.ndarray
    total: int

    @classmethod
    def build(cls, ledger: StrainLedger, rates: RateTable) -> "LedgerView":
        keys = ledger.keys_sorted()
        counts = np.asarray([ledger.count_of(k) for k in keys], dtype=np.int64)
        return cls(
            cumulative=np.cumsum(counts),
            rates=rates.rates_for(keys),
            total=int(counts.sum()),
        )


def policy_fitness(
    policy: PolicyIndividual,
    ledger: StrainLedger,
    ctx: ReproductionContext,
    stream: RngStream,
    *,
    view: Optional[LedgerView] = None,
    rates: Optional[RateTable] = None,
) -> tuple[float, float]:
    """Score one policy against three viruses sampled from the ledger.

    The sample is uniform over individuals (count-weighted over strains,
    with replacement). raw_r is the mean of the three clamped effective
    rates the policy would leave them with; the returned fitness is
    1 / (1 + raw_r), always in (0, 1].
    """
    if ledger.total() == 0:
        raise ValueError("cannot evaluate fitness against an empty ledger")
    if view is None:
        view = LedgerView.build(ledger, rates or RateTable(ctx))
    picks = stream.integers(0, view.total, size=3)
    strain_idx = np.searchsorted(view.cumulative, picks, side="right")
    sampled = np.maximum(0.0, view.rates[strain_idx] - policy.reduction)
    raw_r = float(sampled.mean())
    return raw_r, 1.0 / (1.0 + raw_r)


def roulette_select(fitnesses: Sequence[float] | np.ndarray, stream: RngStream) -> int:
    """Fitness-proportionate index draw."""
    fit = np.asarray(fitnesses, dtype=np.float64)
    if fit.size == 0 or np.any(fit <= 0.0) or not np.all(np.isfinite(fit)):
        raise ValueError("roulette selection needs strictly positive finite fitnesses")
    wheel = np.cumsum(fit)
    u = stream.random() * wheel[-1]
    return min(int(np.searchsorted(wheel, u, side="right")), fit.size - 1)


def policy_mutate(bits: int, length: int, rate: float, stream: RngStream) -> int:
    """Each zero bit independently becomes 1 with probability ``rate``.

    Set bits are absorbing. Consumption is fixed at ``length`` uniforms
    whenever rate > 0 (draws for already-set bits are no-ops), and zero
    when rate == 0.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"mutation rate must lie in [0, 1], got {rate}")
    if rate == 0.0:
        return bits
    u = stream.generator.random(length)
    for j in np.nonzero(u < rate)[0]:
        bits |= 1 << int(j)
    return bits


def next_generation(
    pop: PolicyPopulation,
    ledger: StrainLedger,
    ctx: ReproductionContext,
    crossover_rate: float,
    mutation_rate: float,
    stream: RngStream,
    *,
    rates: Optional[RateTable] = None,
) -> PolicyPopulation:
    """One full generational replacement.

    Every member is scored with a fresh, independent virus sample (stream
    label ("fitness", i), so evaluations could run in parallel without
    changing results). Then S/2 times: two parents by roulette (with
    replacement), crossover with probability ``crossover_rate`` at a
    uniform cut, mutation on both children.
    """
    if not 0.0 <= crossover_rate <= 1.0:
        raise ValueError(f"crossover rate must lie in [0, 1], got {crossover_rate}")
    size = len(pop)
    length = pop.genome_length
    view = LedgerView.build(ledger, rates or RateTable(ctx))

    adjusted = np.empty(size, dtype=np.float64)
    for i, member in enumerate(pop.members):
        _, adjusted[i] = policy_fitness(
            member, ledger, ctx, stream.derive(("fitness", i)), view=view
        )

    repro = stream.derive("reproduction")
    children: list[PolicyIndividual] = []
    for _ in range(size // 2):
        first = pop.members[roulette_select(adjusted, repro)].bits
        second = pop.members[roulette_select(adjusted, repro)].bits
        if repro.random() < crossover_rate and length >= 2:
            cut = 1 + int(repro.integers(0, length - 1))
            first, second = single_point_crossover(first, second, length, cut)
        first = policy_mutate(first, length, mutation_rate, repro)
        second = policy_mutate(second, length, mutation_rate, repro)
        children.append(pop.spawn(first))
        children.append(pop.spawn(second))
    return PolicyPopulation(members=tuple(children), table=pop.table)
