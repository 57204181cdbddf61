"""End-to-end acceptance gate.

One test per release criterion, named and ordered; each prints a
CRITERION line with the measured values next to its threshold. The
paired ensemble (same seeds under every regime) is built once per
module and shared.
"""

import shutil
import subprocess
import time
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from coevo.engine import ALL_REGIMES, Regime, compare_regimes, run
from coevo.genomes import GeneEffectTable, draw_gene_effects
from coevo.policies import PolicyPopulation, policy_mutate, roulette_select
from coevo.rng import RngStream
from coevo.storage import (
    load_default_config,
    load_default_effects,
    write_compare,
)
from coevo.viruses import (
    Mode,
    ReproductionContext,
    StrainLedger,
    infection_step,
    reference_infection_step,
)

N_SEEDS = 30
REPO_ROOT = Path(__file__).resolve().parent.parent


def final_present(result, attr):
    """Last recorded value of a metric (skipping the extinct tail)."""
    for row in reversed(result.rows):
        value = getattr(row, attr)
        if value is not None:
            return value
    raise AssertionError(f"{attr} never recorded for seed {result.seed}")


@pytest.fixture(scope="module")
def ensemble():
    config = load_default_config()
    spec = load_default_effects()
    t0 = time.perf_counter()
    by_regime = compare_regimes(config, spec, list(range(N_SEEDS)), ALL_REGIMES)
    elapsed = time.perf_counter() - t0
    return by_regime, elapsed


@pytest.fixture(scope="module")
def compare_tree(ensemble, tmp_path_factory):
    by_regime, _ = ensemble
    out = tmp_path_factory.mktemp("acceptance") / "compare"
    write_compare(by_regime, list(range(N_SEEDS)), out)
    return out


def test_criterion_01_policy_only_baseline(ensemble, criterion):
    by_regime, _ = ensemble
    for result in by_regime[Regime.POLICY_ONLY]:
        live = [row for row in result.rows if not row.extinct]
        assert live, f"seed {result.seed} recorded no live rows"
        for row in live:
            assert row.mean_virus_r == 2.63, (result.seed, row.t, row.mean_virus_r)
            assert row.n_strains == 1, (result.seed, row.t, row.n_strains)

    config = replace(load_default_config(), regime=Regime.POLICY_ONLY)
    spec = load_default_effects()
    timings = []
    for seed in range(3):
        t0 = time.perf_counter()
        run(config, spec, seed=seed)
        timings.append(time.perf_counter() - t0)
    worst = max(timings)
    assert worst < 1.0
    criterion(
        f"\nCRITERION 1: PASS - mean_virus_r == 2.63 and n_strains == 1 on every "
        f"live row of {N_SEEDS} policy-only runs; slowest run {worst * 1e3:.0f} ms (< 1 s)"
    )


def test_criterion_02_coevolution_accelerates_adaptation(ensemble, criterion):
    by_regime, elapsed = ensemble
    coevo = np.array(
        [final_present(r, "mean_virus_r") for r in by_regime[Regime.COEVOLUTION]]
    )
    alone = np.array(
        [final_present(r, "mean_virus_r") for r in by_regime[Regime.VIRUS_ONLY]]
    )
    assert len(coevo) == len(alone) == N_SEEDS
    test = stats.ttest_rel(coevo, alone, alternative="greater")
    assert coevo.mean() > alone.mean()
    assert test.pvalue < 0.05
    assert elapsed < 300.0
    criterion(
        f"\nCRITERION 2: PASS - final mean_virus_r {coevo.mean():.3f} (coevolution) "
        f"> {alone.mean():.3f} (virus-only), paired one-sided p = {test.pvalue:.2e} "
        f"(< 0.05), ensemble in {elapsed:.1f} s (< 300 s); indicative target 3.1±0.5"
    )


def test_criterion_03_dominant_strain_concentration(ensemble, criterion):
    by_regime, _ = ensemble
    coevo = np.array(
        [final_present(r, "freq_best_gene") for r in by_regime[Regime.COEVOLUTION]]
    )
    alone = np.array(
        [final_present(r, "freq_best_gene") for r in by_regime[Regime.VIRUS_ONLY]]
    )
    assert coevo.mean() > alone.mean()
    criterion(
        f"\nCRITERION 3: PASS - final freq_best_gene {coevo.mean():.3f} (coevolution) "
        f"> {alone.mean():.3f} (virus-only); indicative target 0.35±0.15"
    )


def test_criterion_04_diversity_ordering(ensemble, criterion):
    by_regime, _ = ensemble
    peak = {
        regime: np.array([max(row.n_strains for row in r.rows) for r in results])
        for regime, results in by_regime.items()
    }
    assert peak[Regime.VIRUS_ONLY].mean() > peak[Regime.COEVOLUTION].mean()
    criterion(
        f"\nCRITERION 4: PASS - mean peak n_strains {peak[Regime.VIRUS_ONLY].mean():.1f} "
        f"(virus-only) > {peak[Regime.COEVOLUTION].mean():.1f} (coevolution)"
    )


def test_criterion_05_policy_only_suppression(ensemble, criterion):
    by_regime, _ = ensemble
    suppressed = 0
    for result in by_regime[Regime.POLICY_ONLY]:
        if any(
            row.mean_effective_r is not None and row.mean_effective_r < 1.0
            for row in result.rows
            if row.t <= 20
        ):
            suppressed += 1
    share = suppressed / N_SEEDS
    assert share >= 0.5
    criterion(
        f"\nCRITERION 5: PASS - mean_effective_r < 1 by t=20 in {suppressed}/{N_SEEDS} "
        f"policy-only replicates ({share:.0%} >= 50%)"
    )


def _oracle_case(index):
    """Deterministic small-population fixture for the equivalence check."""
    setup = RngStream(50_000 + index).derive("case")
    g = setup.generator
    genome_length = int(g.integers(2, 11))
    effects = draw_gene_effects(genome_length, setup.derive("effects"))
    counts = {
        int(g.integers(0, 1 << genome_length)): int(g.integers(1, 200))
        for _ in range(int(g.integers(1, 6)))
    }
    if sum(counts.values()) > 1000:
        return None
    ctx = ReproductionContext(
        base_rate=2.63, gene_effects=effects, mode=Mode.EXPECTED
    )
    reduction = float(g.uniform(0.0, 3.0))
    mu = float(g.choice([0.0, 1e-4, 1e-3, 0.05, 0.2]))
    return StrainLedger(genome_length, counts), genome_length, ctx, reduction, mu


def test_criterion_06_oracle_equivalence(criterion):
    checked = 0
    index = 0
    while checked < 100:
        case = _oracle_case(index)
        index += 1
        assert index < 1000, "case generator starved"
        if case is None:
            continue
        ledger, genome_length, ctx, reduction, mu = case
        stream_label = ("oracle", index)
        out = infection_step(
            ledger, ctx, reduction, mu, RngStream(7).derive(stream_label)
        )
        ref = reference_infection_step(
            ledger.expand(),
            genome_length,
            ctx,
            reduction,
            mu,
            RngStream(7).derive(stream_label),
        )
        assert out.as_dict() == dict(Counter(ref)), f"multiset mismatch in case {index}"
        checked += 1

    # stochastic totals, ensemble mean vs the expected-mode value; the fixture
    # has integral n*frac per strain so the expected total carries no rounding
    # bias and must match the stochastic mean within sampling error
    effects = GeneEffectTable((0.12, -0.38, 0.25, 0.08))
    ledger = StrainLedger(4, {0b0000: 500, 0b0001: 400})  # rates 2.63, 2.75
    reduction = 0.13  # effective 2.50 and 2.62; 500*0.5 and 400*0.62 integral
    ctx_e = ReproductionContext(base_rate=2.63, gene_effects=effects, mode=Mode.EXPECTED)
    ctx_s = ReproductionContext(base_rate=2.63, gene_effects=effects, mode=Mode.STOCHASTIC)
    expected_total = infection_step(
        ledger, ctx_e, reduction, 1e-3, RngStream(0).derive("totals")
    ).total()
    totals = np.array(
        [
            infection_step(
                ledger, ctx_s, reduction, 1e-3, RngStream(seed).derive("totals")
            ).total()
            for seed in range(1000)
        ],
        dtype=np.float64,
    )
    se = totals.std(ddof=1) / np.sqrt(totals.size)
    gap = abs(totals.mean() - expected_total)
    assert gap <= 3 * se
    criterion(
        f"\nCRITERION 6: PASS - 100/100 expected-mode multisets identical to the "
        f"individual-level reference; stochastic mean total {totals.mean():.2f} vs "
        f"expected {expected_total} (gap {gap:.3f} <= 3*SE {3 * se:.3f} over 10^3 seeds)"
    )


def test_criterion_07_operator_statistics(criterion):
    draws = 100_000
    fixtures = [[1.0, 1.0, 1.0, 1.0], [1.0, 3.0], [0.2, 0.3, 0.5]]
    pvalues = []
    for i, weights in enumerate(fixtures):
        stream = RngStream(1000 + i).derive("roulette")
        counts = np.bincount(
            [roulette_select(weights, stream) for _ in range(draws)],
            minlength=len(weights),
        )
        expected = np.asarray(weights, dtype=np.float64)
        expected = expected / expected.sum() * draws
        _, p = stats.chisquare(counts, f_exp=expected)
        assert p > 0.01, (weights, counts.tolist(), p)
        pvalues.append(p)

    # policy mutation: mean activations over fresh genomes vs binomial mean
    trials, length, rate = 100_000, 46, 0.05
    stream = RngStream(2024).derive("mutate")
    activations = sum(
        bin(policy_mutate(0, length, rate, stream)).count("1") for _ in range(trials)
    )
    policy_observed = activations / trials
    policy_binomial = length * rate
    assert policy_observed == pytest.approx(policy_binomial, rel=0.02)

    # virus mutation: mutant share of 100k offspring vs 1-(1-mu)^G
    genome_length, mu = 10, 0.05
    ctx = ReproductionContext(
        base_rate=2.63,
        gene_effects=GeneEffectTable((0.0,) * genome_length),
        mode=Mode.EXPECTED,
    )
    ledger = StrainLedger(genome_length, {0: 40_000})
    out = infection_step(ledger, ctx, 0.13, mu, RngStream(31).derive("virus"))
    assert out.total() == 100_000
    virus_observed = (out.total() - out.count_of(0)) / out.total()
    virus_binomial = 1.0 - (1.0 - mu) ** genome_length
    assert virus_observed == pytest.approx(virus_binomial, rel=0.02)
    criterion(
        f"\nCRITERION 7: PASS - roulette chi-square p = "
        f"{', '.join(f'{p:.3f}' for p in pvalues)} (all > 0.01 over 10^5 draws); "
        f"policy mutation mean {policy_observed:.4f} vs {policy_binomial:.4f}, virus "
        f"mutant share {virus_observed:.4f} vs {virus_binomial:.4f} (both within 2%)"
    )


def test_criterion_08_aggregation_scale(criterion):
    config = replace(
        load_default_config(),
        regime=Regime.VIRUS_ONLY,
        mode=Mode.EXPECTED,
        population_cap=10**12,
    )
    spec = load_default_effects()
    t0 = time.perf_counter()
    result = run(config, spec, seed=0)
    elapsed = time.perf_counter() - t0
    final_total = result.final_row().total_viruses
    assert final_total >= 10**9
    assert elapsed < 60.0
    criterion(
        f"\nCRITERION 8: PASS - virus-only expected-mode run reached "
        f"{final_total:.2e} individuals ({result.final_row().n_strains} strains) "
        f"in {elapsed:.2f} s (< 60 s)"
    )


def test_criterion_09_worker_determinism(tmp_path, monkeypatch, criterion):
    from coevo.cli import main

    digests = {}
    for workers in ("1", "4"):
        monkeypatch.setenv("COEVO_THREADS", workers)
        out = tmp_path / f"workers_{workers}"
        assert main(["sweep", "--seeds", "6", "--out", str(out)]) == 0
        digests[workers] = {
            p.relative_to(out).as_posix(): p.read_bytes()
            for p in out.rglob("*")
            if p.is_file()
        }
    assert digests["1"].keys() == digests["4"].keys()
    mismatched = [k for k in digests["1"] if digests["1"][k] != digests["4"][k]]
    assert mismatched == []
    criterion(
        f"\nCRITERION 9: PASS - {len(digests['1'])} output files byte-identical "
        f"between 1-worker and 4-worker sweeps"
    )


def test_criterion_10_figures_from_compare_output(compare_tree, tmp_path, criterion):
    cli = REPO_ROOT / "frontend" / "dist" / "cli.js"
    node = shutil.which("node")
    if not cli.exists() or node is None:
        pytest.skip("figures package not built; covered by its own test suite")
    out = tmp_path / "figures"
    args = [node, str(cli), "--inputs"]
    args += [str(compare_tree / regime.value / "summary.csv") for regime in ALL_REGIMES]
    args += ["--labels"] + [regime.value for regime in ALL_REGIMES]
    args += ["--panel", "all", "--out", str(out)]
    proc = subprocess.run(args, capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    panels = sorted(p.name for p in out.glob("*.svg"))
    assert panels == [
        "best_gene_freq.svg",
        "diversity.svg",
        "effective_r.svg",
        "policy_impact.svg",
        "virus_r.svg",
    ]
    svg = (out / "virus_r.svg").read_text(encoding="utf-8")
    # the policy-only series must be the flat 2.63 baseline
    import re

    match = re.search(r'data-label="policy-only"[^>]*data-values="([^"]+)"', svg)
    assert match, "policy-only series missing from virus_r panel"
    values = {v for v in match.group(1).split(",") if v}
    assert values == {"2.63"}
    criterion(
        "\nCRITERION 10: PASS - five panels regenerated from compare output; "
        "policy-only virus_r series is flat at 2.63"
    )
