"""Strain ledger, reproduction arithmetic, and the aggregated infection step
checked against the individual-level reference."""

from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coevo.genomes import GeneEffectTable, draw_gene_effects
from coevo.rng import RngStream
from coevo.viruses import (
    Mode,
    PopulationOverflow,
    RateTable,
    ReproductionContext,
    StrainLedger,
    effective_rate,
    infection_step,
    metrics_of,
    offspring_count,
    reference_infection_step,
    virus_rate,
)


def ctx_of(effects, mode=Mode.EXPECTED, base=2.63):
    return ReproductionContext(base_rate=base, gene_effects=effects, mode=mode)


# ---------------------------------------------------------------------------
# Ledger
# ---------------------------------------------------------------------------


def test_ledger_drops_zero_counts():
    ledger = StrainLedger(4, {0b0001: 5, 0b0010: 0})
    assert len(ledger) == 1
    assert 0b0010 not in ledger
    assert ledger.total() == 5


def test_ledger_rejects_bad_entries():
    with pytest.raises(ValueError):
        StrainLedger(4, {0b10000: 1})  # key needs 5 bits
    with pytest.raises(ValueError):
        StrainLedger(4, {0b1: -2})
    with pytest.raises(ValueError):
        StrainLedger(0, {})


def test_ledger_founders_and_expand():
    ledger = StrainLedger.founders(10, 10)
    assert ledger.total() == 10
    assert len(ledger) == 1
    assert ledger.count_of(0) == 10
    assert StrainLedger(3, {0b011: 2, 0b001: 1}).expand() == [0b001, 0b011, 0b011]


def test_ledger_equality_is_content_equality():
    assert StrainLedger(4, {1: 2, 3: 4}) == StrainLedger(4, {3: 4, 1: 2, 5: 0})
    assert StrainLedger(4, {1: 2}) != StrainLedger(5, {1: 2})


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


def test_virus_rate_adds_active_gene_effects(dyadic_effects):
    ctx = ctx_of(dyadic_effects)
    assert virus_rate(0, ctx) == 2.63
    # ascending-locus accumulation, mirrored here term by term
    assert virus_rate(0b0101, ctx) == 2.63 + 0.5 + 0.125
    assert virus_rate(0b1111, ctx) == 2.63 + 0.5 + -0.25 + 0.125 + 0.0625


def test_rate_table_memoizes_consistently(dyadic_effects):
    ctx = ctx_of(dyadic_effects)
    table = RateTable(ctx)
    keys = [0, 3, 9, 15]
    direct = [virus_rate(k, ctx) for k in keys]
    assert list(table.rates_for(keys)) == direct
    assert table.rate(9) == direct[2]


def test_effective_rate_clamps_at_zero():
    assert effective_rate(2.63, 0.5) == 2.63 - 0.5
    assert effective_rate(1.0, 2.5) == 0.0
    assert effective_rate(1.0, 1.0) == 0.0


# ---------------------------------------------------------------------------
# Offspring counts (dyadic oracles: every product below is exact float math,
# values computed by hand with banker's rounding)
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "n,r,want",
    [
        (10, 2.63, 26),
        (10, 2.25, 22),  # 20 + round(2.5) -> 22
        (10, 2.75, 28),  # 20 + round(7.5) -> 28
        (8, 2.375, 19),
        (3, 0.4, 1),
        (5, 0.0, 0),
        (0, 3.5, 0),
        (7, 3.0, 21),
    ],
)
def test_offspring_count_expected(n, r, want):
    assert offspring_count(n, r, Mode.EXPECTED) == want


def test_offspring_count_stochastic_bounds_and_mean():
    stream = RngStream(77).derive("births")
    draws = [offspring_count(100, 2.25, Mode.STOCHASTIC, stream) for _ in range(4000)]
    assert all(200 <= d <= 300 for d in draws)
    assert np.mean(draws) == pytest.approx(225.0, rel=0.01)


def test_offspring_count_stochastic_requires_stream():
    with pytest.raises(ValueError):
        offspring_count(10, 2.5, Mode.STOCHASTIC)


def test_expected_growth_recurrence(dyadic_effects):
    # independent recurrence: n' = 2n + round(n/2) for r = 2.5, no mutation
    ctx = ctx_of(GeneEffectTable((0.0,) * 4))
    ledger = StrainLedger.founders(4, 10)
    seen = [ledger.total()]
    for t in range(6):
        ledger = infection_step(ledger, ctx, 0.13, 0.0, RngStream(0).derive(("p", t)))
        seen.append(ledger.total())
    assert seen == [10, 25, 62, 155, 388, 970, 2425]
    assert len(ledger) == 1  # mu=0 can never create strains


# ---------------------------------------------------------------------------
# Infection step
# ---------------------------------------------------------------------------


def test_overflow_raises_before_mutation_work():
    ctx = ctx_of(GeneEffectTable((0.0,) * 4))
    ledger = StrainLedger.founders(4, 1000)
    with pytest.raises(PopulationOverflow) as err:
        infection_step(ledger, ctx, 0.0, 0.0, RngStream(0).derive("x"), cap=2000)
    assert err.value.total == 2630
    assert err.value.cap == 2000


def test_extinction_returns_empty_ledger():
    ctx = ctx_of(GeneEffectTable((0.0,) * 4))
    ledger = StrainLedger.founders(4, 50)
    out = infection_step(ledger, ctx, 5.0, 0.0, RngStream(0).derive("x"))
    assert out.total() == 0
    assert len(out) == 0


def test_full_mutation_flips_every_bit():
    # mu=1 makes every offspring bit flip: children are exact complements
    ctx = ctx_of(GeneEffectTable((0.0,) * 4))
    ledger = StrainLedger(4, {0b0011: 10})
    out = infection_step(ledger, ctx, 0.63, 1.0, RngStream(5).derive("x"))
    assert out.keys_sorted() == [0b1100]
    assert out.total() == 20


def test_infection_step_deterministic():
    effects = draw_gene_effects(10, RngStream(3).derive("g"))
    ctx = ctx_of(effects, mode=Mode.STOCHASTIC)
    ledger = StrainLedger(10, {0: 400, 5: 100, 1023: 30})
    a = infection_step(ledger, ctx, 0.8, 0.01, RngStream(9).derive(("p", 0)))
    b = infection_step(ledger, ctx, 0.8, 0.01, RngStream(9).derive(("p", 0)))
    assert a == b


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_aggregated_step_matches_individual_reference(seed):
    """The load-bearing equivalence: expected-mode aggregated infection must
    produce the exact multiset an individual-by-individual walk produces."""
    setup = RngStream(seed).derive("case")
    g = setup.generator
    G = int(g.integers(2, 9))
    effects = draw_gene_effects(G, setup.derive("effects"))
    ctx = ctx_of(effects)
    counts = {
        int(g.integers(0, 1 << G)): int(g.integers(1, 120))
        for _ in range(int(g.integers(1, 5)))
    }
    ledger = StrainLedger(G, counts)
    reduction = float(g.uniform(0.0, 2.5))
    mu = float(g.choice([0.0, 1e-3, 0.05, 0.3]))
    out = infection_step(ledger, ctx, reduction, mu, RngStream(seed).derive("step"))
    ref = reference_infection_step(
        ledger.expand(), G, ctx, reduction, mu, RngStream(seed).derive("step")
    )
    assert out.as_dict() == dict(Counter(ref))


def test_stochastic_step_matches_reference_totals_distribution():
    # same construction, stochastic mode: per-strain binomials vs per-individual
    # Bernoullis agree in distribution, so ensemble means must line up
    effects = GeneEffectTable((0.12, -0.38, 0.25, 0.08))
    ctx = ctx_of(effects, mode=Mode.STOCHASTIC)
    ledger = StrainLedger(4, {0b0000: 150, 0b0001: 90})
    eng, ref = [], []
    for seed in range(300):
        eng.append(
            infection_step(ledger, ctx, 0.13, 0.0, RngStream(seed).derive("s")).total()
        )
        ref.append(
            len(
                reference_infection_step(
                    ledger.expand(), 4, ctx, 0.13, 0.0, RngStream(seed).derive("r")
                )
            )
        )
    se = np.hypot(np.std(eng, ddof=1), np.std(ref, ddof=1)) / np.sqrt(300)
    assert abs(np.mean(eng) - np.mean(ref)) < 4 * se


def test_reference_step_population_guard():
    ctx = ctx_of(GeneEffectTable((0.0,) * 2))
    with pytest.raises(ValueError):
        reference_infection_step([0] * 100_001, 2, ctx, 0.0, 0.0, RngStream(0).derive("x"))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def test_metrics_single_strain_is_exact(dyadic_effects):
    ctx = ctx_of(GeneEffectTable((0.0,) * 10))
    m = metrics_of(StrainLedger.founders(10, 12345), ctx, 0.4)
    assert m.total == 12345
    assert m.n_strains == 1
    assert m.mean_rate == 2.63  # exact, not approx
    assert m.mean_effective_rate == 2.63 - 0.4
    assert m.freq_best_gene == 0.0


def test_metrics_weighted_means(dyadic_effects):
    ctx = ctx_of(dyadic_effects)
    # best gene is locus 0 (+0.5); strain 0b0001 carries it
    ledger = StrainLedger(4, {0b0000: 3, 0b0001: 1})
    m = metrics_of(ledger, ctx, 0.0)
    assert m.freq_best_gene == 0.25
    assert m.mean_rate == pytest.approx((3 * 2.63 + (2.63 + 0.5)) / 4)
    assert m.n_strains == 2


def test_metrics_empty_ledger():
    ctx = ctx_of(GeneEffectTable((0.0,) * 4))
    m = metrics_of(StrainLedger(4, {}), ctx, 1.0)
    assert m.total == 0
    assert m.n_strains == 0
    assert m.mean_rate is None
    assert m.mean_effective_rate is None
    assert m.freq_best_gene is None


def test_metrics_effective_rate_clamps_per_strain(dyadic_effects):
    # strains below the reduction contribute 0, not negative values
    ctx = ctx_of(dyadic_effects)
    ledger = StrainLedger(4, {0b0010: 1, 0b0001: 1})  # rates 2.38 and 3.13
    m = metrics_of(ledger, ctx, 2.5)
    assert m.mean_effective_rate == pytest.approx((0.0 + (2.63 + 0.5 - 2.5)) / 2)
