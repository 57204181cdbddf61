"""Deterministic random streams with label-addressed substreams.

Every stochastic component draws from an :class:`RngStream`. A stream is
identified by the chain of labels that produced it from the master seed,
not by the order in which streams were created, so a worker that handles
strain 17 of period 4 derives exactly the stream a serial run would. That
property is what makes parallel and serial execution bit-identical.

The module also provides ``bernoulli_positions``, the shared low-level
sampler for "which of these N independent Bernoulli(p) trials succeeded".
Both the aggregated infection step and its per-individual reference
implementation draw mutation flips through it (see viruses.py for why the
primitive must be shared).
"""

from __future__ import annotations

import hashlib
from typing import Optional, Union

import numpy as np

Label = Union[int, str, tuple]

_ROOT_TAG = b"coevo/stream/v1"
_WORD_MASK = (1 << 64) - 1


def _encode_label(label: Label) -> bytes:
    # Stable, injective encoding: type tag + length prefix + payload.
    if isinstance(label, int):
        payload = str(label).encode("ascii")
        return b"i" + len(payload).to_bytes(4, "little") + payload
    if isinstance(label, str):
        payload = label.encode("utf-8")
        return b"s" + len(payload).to_bytes(4, "little") + payload
    if isinstance(label, tuple):
        payload = b"".join(_encode_label(part) for part in label)
        return b"t" + len(payload).to_bytes(4, "little") + payload
    raise TypeError(f"stream labels must be int, str, or tuple, got {label!r}")


class RngStream:
    """A seeded pseudo-random stream that can derive independent children.

    ``derive(label)`` is a pure function of (this stream's identity, label):
    it does not consume any randomness, may be called in any order, and
    always yields the same child. Draw methods consume state sequentially,
    so "identical seed and identical call sequence" gives identical output.
    """

    __slots__ = ("_key", "_gen")

    def __init__(self, seed: int):
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise TypeError("seed must be an integer")
        material = _ROOT_TAG + (seed & _WORD_MASK).to_bytes(8, "little")
        self._key = hashlib.sha256(material).digest()
        self._gen: Optional[np.random.Generator] = None

    @classmethod
    def _from_key(cls, key: bytes) -> "RngStream":
        stream = cls.__new__(cls)
        stream._key = key
        stream._gen = None
        return stream

    def derive(self, label: Label) -> "RngStream":
        """Return the independent substream addressed by ``label``."""
        key = hashlib.sha256(self._key + b"/" + _encode_label(label)).digest()
        return RngStream._from_key(key)

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy generator (created lazily)."""
        if self._gen is None:
            entropy = int.from_bytes(self._key, "little")
            self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
        return self._gen

    # Thin passthroughs. Kept minimal on purpose: every draw a component
    # makes should be easy to enumerate when reasoning about consumption.

    def random(self) -> float:
        return float(self.generator.random())

    def uniform(self, low, high, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in [low, high) (numpy half-open convention)."""
        return self.generator.integers(low, high, size=size)

    def binomial(self, n: int, p: float) -> int:
        return int(self.generator.binomial(n, p))


def bernoulli_positions(stream: RngStream, n_trials: int, p: float) -> np.ndarray:
    """Sorted indices of the successes among ``n_trials`` Bernoulli(p) trials.

    Equivalent in law to testing every trial, but costs O(successes): the
    gap between consecutive successes is geometric, so the sampler jumps
    from one success straight to the next. With p near 1e-4 this is what
    keeps ten-billion-trial lattices affordable.

    The draw sequence depends only on (stream, n_trials, p), which lets two
    structurally different callers reproduce the same realization.
    """
    if n_trials < 0:
        raise ValueError("n_trials must be non-negative")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if n_trials == 0 or p == 0.0:
        return np.empty(0, dtype=np.int64)
    if p == 1.0:
        return np.arange(n_trials, dtype=np.int64)

    gen = stream.generator
    chunks = []
    last = -1  # index of the most recent success
    while True:
        remaining = n_trials - last - 1
        size = max(16, int(remaining * p * 1.25) + 8)
        jumps = gen.geometric(p, size=size)
        candidates = last + np.cumsum(jumps)
        cut = int(np.searchsorted(candidates, n_trials, side="left"))
        chunks.append(candidates[:cut])
        if cut < candidates.size:
            break
        last = int(candidates[-1])
    if len(chunks) == 1:
        return chunks[0]
    return np.concatenate(chunks)
