"""Strain-aggregated virus population dynamics.

The virus population is a :class:`StrainLedger`: a map from genome word to
individual count. One period of the infection process turns the ledger of
parents into a ledger of offspring (generational replacement, one serial
interval per period); populations of ten billion cost the same as
populations of ten because all per-individual work is collapsed into
per-strain counts plus O(#mutations) sampling.

``reference_infection_step`` is the brute-force oracle: it walks every
individual and flips bits one at a time. In expected mode it reproduces
the aggregated step exactly (same per-strain streams, same aggregate
rounding rule, same Bernoulli-lattice flip realizations), so tests can
demand multiset equality; in stochastic mode offspring counts are resolved
per individual instead of per strain, so agreement is distributional only.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional

import numpy as np

from .genomes import GeneEffectTable, flip_bit, set_bit_indices
from .rng import RngStream, bernoulli_positions

DEFAULT_POPULATION_CAP = 10_000_000_000
_REFERENCE_LIMIT = 100_000


class Mode(str, Enum):
    """How fractional reproduction is resolved."""

    STOCHASTIC = "stochastic"  # floor + Bernoulli(frac) per individual
    EXPECTED = "expected"      # floor + half-even rounding of the aggregate mass


class PopulationOverflow(RuntimeError):
    """Raised when one period's offspring total exceeds the population cap."""

    def __init__(self, total: int, cap: int):
        super().__init__(f"offspring total {total} exceeds population cap {cap}")
        self.total = total
        self.cap = cap


@dataclass(frozen=True)
class ReproductionContext:
    base_rate: float
    gene_effects: GeneEffectTable
    mode: Mode

    def __post_init__(self):
        if not (math.isfinite(self.base_rate) and self.base_rate > 0):
            raise ValueError(f"base_rate must be positive and finite, got {self.base_rate}")


class StrainLedger:
    """Aggregated virus population: genome word -> individual count.

    Zero counts are never retained, keys must fit the genome length, and
    equality is plain map equality. Instances are treated as immutable
    once built; the infection step constructs a fresh ledger.
    """

    __slots__ = ("genome_length", "_counts", "_total")

    def __init__(self, genome_length: int, counts: Mapping[int, int]):
        if not 1 <= genome_length <= 64:
            raise ValueError(f"genome length must be in 1..64, got {genome_length}")
        cleaned: dict[int, int] = {}
        total = 0
        for bits, count in counts.items():
            bits = int(bits)
            count = int(count)
            if bits < 0 or bits >> genome_length:
                raise ValueError(f"strain key 0x{bits:x} does not fit in {genome_length} bits")
            if count < 0:
                raise ValueError(f"strain 0x{bits:x} has negative count {count}")
            if count:
                cleaned[bits] = count
                total += count
        self.genome_length = genome_length
        self._counts = cleaned
        self._total = total

    @classmethod
    def founders(cls, genome_length: int, count: int, genome: int = 0) -> "StrainLedger":
        return cls(genome_length, {genome: count})

    def total(self) -> int:
        return self._total

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, bits: int) -> bool:
        return bits in self._counts

    def __eq__(self, other) -> bool:
        if not isinstance(other, StrainLedger):
            return NotImplemented
        return self.genome_length == other.genome_length and self._counts == other._counts

    def __repr__(self) -> str:
        return f"StrainLedger(G={self.genome_length}, strains={len(self)}, total={self.total()})"

    def count_of(self, bits: int) -> int:
        return self._counts.get(bits, 0)

    def items_sorted(self) -> list[tuple[int, int]]:
        """(genome, count) pairs in ascending genome order: the canonical
        iteration order every consumer uses, so float accumulation and
        stream derivation never depend on dict history."""
        return sorted(self._counts.items())

    def keys_sorted(self) -> list[int]:
        return sorted(self._counts)

    def as_dict(self) -> dict[int, int]:
        return dict(self._counts)

    def expand(self) -> list[int]:
        """Individual-level view; only sensible for small populations."""
        out: list[int] = []
        for bits, count in self.items_sorted():
            out.extend([bits] * count)
        return out


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


def virus_rate(bits: int, ctx: ReproductionContext) -> float:
    """Base rate plus the effects of the activated genes (ascending order,
    so the float result is identical everywhere the rate is computed)."""
    rate = ctx.base_rate
    effects = ctx.gene_effects.effects
    for i in set_bit_indices(bits):
        rate += effects[i]
    return rate


class RateTable:
    """Memoized per-strain rates. At most 2^G distinct genomes ever appear
    in a run, so caching makes rate lookups O(1) amortized and guarantees a
    single canonical float per strain."""

    __slots__ = ("ctx", "_cache")

    def __init__(self, ctx: ReproductionContext):
        self.ctx = ctx
        self._cache: dict[int, float] = {}

    def rate(self, bits: int) -> float:
        cached = self._cache.get(bits)
        if cached is None:
            cached = virus_rate(bits, self.ctx)
            self._cache[bits] = cached
        return cached

    def rates_for(self, keys: Iterable[int]) -> np.ndarray:
        return np.asarray([self.rate(k) for k in keys], dtype=np.float64)


def effective_rate(rate: float, reduction: float) -> float:
    """Rate after the policy population's average reduction, floored at 0."""
    return max(0.0, rate - reduction)


# ---------------------------------------------------------------------------
# Reproduction
# ---------------------------------------------------------------------------


def offspring_count(n: int, r: float, mode: Mode, stream: Optional[RngStream] = None) -> int:
    """Offspring of a strain with ``n`` individuals at effective rate ``r``.

    Every individual produces floor(r) offspring. The fractional remainder
    becomes Binomial(n, frac) extra offspring in stochastic mode, or the
    half-even rounding of n*frac in expected mode (aggregate rounding: the
    deterministic twin of the binomial mean).
    """
    if n < 0:
        raise ValueError(f"count must be non-negative, got {n}")
    if not (math.isfinite(r) and r >= 0):
        raise ValueError(f"rate must be non-negative and finite, got {r}")
    whole = math.floor(r)
    frac = r - whole
    base = n * whole
    if n == 0 or frac == 0.0:
        return base
    if mode is Mode.EXPECTED:
        return base + round(n * frac)
    if stream is None:
        raise ValueError("stochastic mode needs a stream")
    return base + stream.binomial(n, frac)


def _tally(acc: dict[int, int], bits: int, count: int) -> None:
    if count:
        acc[bits] = acc.get(bits, 0) + count


def _mutation_patterns(positions: np.ndarray, genome_length: int) -> tuple[int, np.ndarray]:
    """Group lattice success positions into per-offspring flip patterns.

    Returns (number of mutated offspring, uint64 XOR pattern per mutant).
    ``positions`` is sorted, so offspring boundaries are run boundaries.
    """
    offspring = positions // genome_length
    locus = positions % genome_length
    firsts = np.empty(offspring.size, dtype=bool)
    firsts[0] = True
    np.not_equal(offspring[1:], offspring[:-1], out=firsts[1:])
    starts = np.nonzero(firsts)[0]
    flips_per = np.diff(np.append(starts, offspring.size))

    patterns = np.zeros(starts.size, dtype=np.uint64)
    single = flips_per == 1
    patterns[single] = np.uint64(1) << locus[starts[single]].astype(np.uint64)
    for idx in np.nonzero(~single)[0]:
        begin = int(starts[idx])
        pattern = 0
        for b in locus[begin : begin + int(flips_per[idx])]:
            pattern |= 1 << int(b)
        patterns[idx] = pattern
    return starts.size, patterns


def infection_step(
    ledger: StrainLedger,
    ctx: ReproductionContext,
    reduction: float,
    mu: float,
    stream: RngStream,
    *,
    cap: int = DEFAULT_POPULATION_CAP,
    rates: Optional[RateTable] = None,
) -> StrainLedger:
    """Advance the ledger one serial interval.

    Per strain: offspring are counted at the strain's effective rate, then
    each offspring independently flips each genome bit with probability
    ``mu``; offspring with at least one flip leave the parent strain.
    Parents do not persist. Raises :class:`PopulationOverflow` before any
    mutation work if the offspring total exceeds ``cap``.

    Randomness is drawn from per-strain substreams labeled by genome word
    ("count" for the binomial, "mutation" for the flip lattice), which
    makes the result independent of strain iteration order and of how
    strains might be partitioned across workers.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mutation rate must lie in [0, 1], got {mu}")
    if rates is None:
        rates = RateTable(ctx)
    genome_length = ledger.genome_length

    plan: list[tuple[int, int, RngStream]] = []
    total = 0
    for bits, n in ledger.items_sorted():
        r_eff = effective_rate(rates.rate(bits), reduction)
        strain_stream = stream.derive(("strain", bits))
        m = offspring_count(n, r_eff, ctx.mode, strain_stream.derive("count"))
        if m:
            plan.append((bits, m, strain_stream))
            total += m
    if total > cap:
        raise PopulationOverflow(total, cap)

    acc: dict[int, int] = {}
    for bits, m, strain_stream in plan:
        if mu == 0.0:
            _tally(acc, bits, m)
            continue
        positions = bernoulli_positions(strain_stream.derive("mutation"), m * genome_length, mu)
        if positions.size == 0:
            _tally(acc, bits, m)
            continue
        n_mutants, patterns = _mutation_patterns(positions, genome_length)
        _tally(acc, bits, m - n_mutants)
        children = np.uint64(bits) ^ patterns
        uniq, counts = np.unique(children, return_counts=True)
        for child, count in zip(uniq.tolist(), counts.tolist()):
            _tally(acc, int(child), int(count))
    return StrainLedger(genome_length, acc)


def reference_infection_step(
    individuals: list[int],
    genome_length: int,
    ctx: ReproductionContext,
    reduction: float,
    mu: float,
    stream: RngStream,
    *,
    rates: Optional[RateTable] = None,
) -> list[int]:
    """Individual-based oracle for :func:`infection_step`.

    Walks every individual, resolves its offspring, and applies each bit
    flip one ``flip_bit`` call at a time. Shares with the aggregated step
    exactly the pieces the equality contract forces it to share: the
    per-strain stream labels, the expected-mode aggregate rounding rule,
    and the Bernoulli-lattice flip positions. Everything the aggregation
    is supposed to get right (per-strain bookkeeping, pattern grouping,
    ledger merging) is recomputed here from first principles.

    In stochastic mode the fractional offspring are resolved per individual
    (floor + Bernoulli(frac) each), so totals differ realization-by-
    realization from the per-strain binomial; only distributions match.
    """
    if len(individuals) > _REFERENCE_LIMIT:
        raise ValueError(f"reference implementation capped at {_REFERENCE_LIMIT} individuals")
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mutation rate must lie in [0, 1], got {mu}")
    if rates is None:
        rates = RateTable(ctx)

    grouped = Counter(individuals)
    out: list[int] = []
    for bits in sorted(grouped):
        n = grouped[bits]
        r_eff = effective_rate(rates.rate(bits), reduction)
        strain_stream = stream.derive(("strain", bits))
        count_stream = strain_stream.derive("count")

        if ctx.mode is Mode.EXPECTED:
            m = offspring_count(n, r_eff, Mode.EXPECTED)
        else:
            whole = math.floor(r_eff)
            frac = r_eff - whole
            m = 0
            for _ in range(n):
                m += whole
                if frac > 0.0 and count_stream.random() < frac:
                    m += 1
        if m == 0:
            continue

        if mu == 0.0:
            out.extend([bits] * m)
            continue
        positions = bernoulli_positions(strain_stream.derive("mutation"), m * genome_length, mu)
        cursor = 0
        for j in range(m):
            upper = (j + 1) * genome_length
            child = bits
            while cursor < positions.size and positions[cursor] < upper:
                child = flip_bit(child, int(positions[cursor] - j * genome_length), genome_length)
                cursor += 1
            out.append(child)
    return out


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerMetrics:
    total: int
    n_strains: int
    mean_rate: Optional[float]
    mean_effective_rate: Optional[float]
    freq_best_gene: Optional[float]
    extinct: bool


def metrics_of(
    ledger: StrainLedger,
    ctx: ReproductionContext,
    reduction: float,
    *,
    rates: Optional[RateTable] = None,
) -> LedgerMetrics:
    """Count-weighted observables of the current ledger.

    ``freq_best_gene`` is the fraction of individuals whose genome sets the
    argmax gene of the effect table. An empty ledger reports absent means
    with the extinct flag raised.
    """
    total = ledger.total()
    if total == 0:
        return LedgerMetrics(0, 0, None, None, None, True)
    if rates is None:
        rates = RateTable(ctx)

    keys = ledger.keys_sorted()
    counts = np.asarray([ledger.count_of(k) for k in keys], dtype=np.float64)
    weights = counts / float(total)
    rate_arr = rates.rates_for(keys)
    mean_rate = float(np.dot(weights, rate_arr))
    mean_eff = float(np.dot(weights, np.maximum(0.0, rate_arr - reduction)))

    best = ctx.gene_effects.best_gene()
    with_best = sum(ledger.count_of(k) for k in keys if (k >> best) & 1)
    return LedgerMetrics(
        total=total,
        n_strains=len(keys),
        mean_rate=mean_rate,
        mean_effective_rate=mean_eff,
        freq_best_gene=with_best / total,
        extinct=False,
    )
