"""Fixed-width binary genomes packed into machine words, plus effect tables.

A genome of length L (1..64) is stored as the low L bits of a plain int,
with bit i carrying locus i. Word storage keeps equality, hashing and
popcount O(1), so a strain ledger can key on the raw value even when the
population behind it is in the billions.

String renderings write locus 0 first: flip_bit(0b0, 0, 10) displays as
"1000000000".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .rng import RngStream

MAX_GENOME_BITS = 64


def _check_length(length: int) -> None:
    if not 1 <= length <= MAX_GENOME_BITS:
        raise ValueError(f"genome length must be in 1..{MAX_GENOME_BITS}, got {length}")


def _check_fits(bits: int, length: int, name: str = "genome") -> None:
    if bits < 0 or bits >> length:
        raise ValueError(f"{name} 0x{bits:x} does not fit in {length} bits")


def bit_of(bits: int, index: int) -> int:
    return (bits >> index) & 1


def set_bit_indices(bits: int) -> Iterator[int]:
    """Yield the indices of set bits in ascending order."""
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


def flip_bit(bits: int, index: int, length: int) -> int:
    """Toggle locus ``index``; an involution."""
    _check_length(length)
    _check_fits(bits, length)
    if not 0 <= index < length:
        raise IndexError(f"bit index {index} out of range for length {length}")
    return bits ^ (1 << index)


def single_point_crossover(a: int, b: int, length: int, cut: int) -> tuple[int, int]:
    """Exchange the genome tails of two parents after position ``cut``.

    Child one keeps loci [0, cut) of ``a`` and takes the rest from ``b``;
    child two is the mirror image. Valid cuts are 1..length-1 so both
    children always receive material from both parents.
    """
    _check_length(length)
    _check_fits(a, length, "parent a")
    _check_fits(b, length, "parent b")
    if not 1 <= cut <= length - 1:
        raise ValueError(f"cut position {cut} out of range 1..{length - 1}")
    head = (1 << cut) - 1
    tail = ((1 << length) - 1) ^ head
    return (a & head) | (b & tail), (b & head) | (a & tail)


def genome_to_str(bits: int, length: int) -> str:
    _check_length(length)
    _check_fits(bits, length)
    return "".join("1" if (bits >> i) & 1 else "0" for i in range(length))


def genome_from_str(text: str) -> int:
    _check_length(len(text))
    bits = 0
    for i, ch in enumerate(text):
        if ch == "1":
            bits |= 1 << i
        elif ch != "0":
            raise ValueError(f"genome string may only contain 0/1, got {text!r}")
    return bits


# ---------------------------------------------------------------------------
# Effect tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneEffectTable:
    """Additive reproduction-rate effect per virus gene, frozen for a run."""

    effects: tuple[float, ...]

    def __post_init__(self):
        _check_length(len(self.effects))
        for i, e in enumerate(self.effects):
            if not -1.0 <= e <= 1.0:
                raise ValueError(f"gene effect {i} = {e} outside [-1, 1]")

    def __len__(self) -> int:
        return len(self.effects)

    def array(self) -> np.ndarray:
        arr = np.asarray(self.effects, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    def best_gene(self) -> int:
        """Index of the largest effect (lowest index wins ties)."""
        return int(np.argmax(self.array()))


def draw_gene_effects(length: int, stream: RngStream) -> GeneEffectTable:
    """Draw one effect per gene, uniform on [-1, 1], once per run."""
    _check_length(length)
    values = stream.uniform(-1.0, 1.0, size=length)
    return GeneEffectTable(tuple(float(v) for v in values))


@dataclass(frozen=True)
class MeasureInterval:
    """One policy measure: a name and the interval its effect is drawn from."""

    name: str
    ci_low: float
    ci_high: float

    def __post_init__(self):
        if not (np.isfinite(self.ci_low) and np.isfinite(self.ci_high)):
            raise ValueError(f"measure {self.name!r}: interval bounds must be finite")
        if self.ci_low > self.ci_high:
            raise ValueError(
                f"measure {self.name!r}: ci_low {self.ci_low} > ci_high {self.ci_high}"
            )


@dataclass(frozen=True)
class PolicyEffectSpec:
    """The per-measure intervals a policy effect table is drawn from."""

    measures: tuple[MeasureInterval, ...]

    def __post_init__(self):
        _check_length(len(self.measures))

    def __len__(self) -> int:
        return len(self.measures)

    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.measures)


@dataclass(frozen=True)
class PolicyEffectTable:
    """One realized draw per measure plus the (default unit) weights.

    ``contributions`` caches effects[j] * weights[j] so computing a policy's
    total reduction is a walk over its set bits.
    """

    names: tuple[str, ...]
    effects: tuple[float, ...]
    weights: tuple[float, ...]
    contributions: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_length(len(self.effects))
        if len(self.names) != len(self.effects) or len(self.weights) != len(self.effects):
            raise ValueError("names, effects and weights must have equal length")
        for j, w in enumerate(self.weights):
            if w < 0:
                raise ValueError(f"weight {j} = {w} must be non-negative")
        object.__setattr__(
            self,
            "contributions",
            tuple(e * w for e, w in zip(self.effects, self.weights)),
        )

    def __len__(self) -> int:
        return len(self.effects)

    def reduction_of(self, bits: int) -> float:
        """Weighted sum of the effects of the activated measures."""
        _check_fits(bits, len(self.effects), "policy genome")
        total = 0.0
        for j in set_bit_indices(bits):
            total += self.contributions[j]
        return total


def draw_policy_effects(
    spec: PolicyEffectSpec,
    stream: RngStream,
    weights: Optional[Sequence[float]] = None,
) -> PolicyEffectTable:
    """Draw each measure's effect uniformly from its interval, once per run.

    Degenerate intervals (low == high) yield that value exactly. Weights
    default to all ones; they are exposed for experimentation but no file
    format sets them.
    """
    lows = np.asarray([m.ci_low for m in spec.measures], dtype=np.float64)
    highs = np.asarray([m.ci_high for m in spec.measures], dtype=np.float64)
    values = stream.uniform(lows, highs)
    if weights is None:
        weights = (1.0,) * len(spec)
    elif len(weights) != len(spec):
        raise ValueError("weights length must match the measure count")
    return PolicyEffectTable(
        names=spec.names(),
        effects=tuple(float(v) for v in values),
        weights=tuple(float(w) for w in weights),
    )
