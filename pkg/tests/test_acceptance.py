"""Acceptance criteria 1-10.

Each test prints one ``criterion N: PASS|FAIL`` line (collected again in the
terminal summary) and fails when the criterion does not hold.
"""

import time

import numpy as np
import pytest

from opaug.analysis import (
    anisotropy_beta,
    anisotropy_mineig,
    l2_counterexample_beta,
    masking_beta,
    overshoot_demo,
    second_variation,
    symmetric_pair_sum,
    trace_identity_sides,
)
from opaug.augmentation import (
    AutocorrelationShrink,
    InverseShrink,
    MatrixEnsemble,
    bootstrap_beta_mc,
    bootstrap_beta_taylor,
    optimal_beta_exact,
)
from opaug.harness import ExperimentConfig, run_experiment
from opaug.linalg import residual_norm_matrix
from opaug.markov import ChainSpec

DRIFT = ChainSpec("drift1d", params={"l": 0.25, "r": 0.25})
REPEATS = 100


def in_band(x, lo, hi):
    return lo <= x <= hi


def random_spd(rng, n):
    g = rng.standard_normal((n, n))
    return g @ g.T + 0.1 * np.eye(n)


def two_atom_ensemble(rng, n):
    a = rng.standard_normal((n, n)) + 2.0 * np.sqrt(n) * np.eye(n)
    z = rng.uniform(0.1, 1.0) * rng.standard_normal((n, n))
    return a, MatrixEnsemble.from_atoms([a + z, a - z])


def test_criterion_1_drift_n64(verdict):
    start = time.perf_counter()
    res = run_experiment(ExperimentConfig(DRIFT, reward="sine1d", N=64, m=100, trials=2000, seed=0))
    elapsed = time.perf_counter() - start
    ok = in_band(res.naive_err_pct, 18.5, 21.8) and in_band(res.aug_err_pct, 14.7, 17.3) and elapsed <= 120
    verdict(1, ok, f"naive {res.naive_err_pct:.2f}% aug {res.aug_err_pct:.2f}% in {elapsed:.1f}s")


def test_criterion_2_drift_n16(verdict):
    cfg = dict(chain=DRIFT, reward="sine1d", N=16, m=100, trials=2000)
    first = run_experiment(ExperimentConfig(seed=0, **cfg))
    wins = int(first.aug_err_pct < first.naive_err_pct)
    for seed in range(1, REPEATS):
        res = run_experiment(ExperimentConfig(seed=seed, **cfg))
        wins += res.aug_err_pct < res.naive_err_pct
    ok = in_band(first.naive_err_pct, 120, 215) and in_band(first.aug_err_pct, 48, 60) and wins >= 0.99 * REPEATS
    verdict(
        2,
        ok,
        f"naive {first.naive_err_pct:.1f}% aug {first.aug_err_pct:.2f}%; aug < naive in {wins}/{REPEATS} runs",
    )


def test_criterion_3_unif2d(verdict):
    start = time.perf_counter()
    res = run_experiment(ExperimentConfig(ChainSpec("unif2d", K=16, gamma=0.99), "sine2d", N=48, trials=500))
    elapsed = time.perf_counter() - start
    ok = in_band(res.aug_err_pct, 22, 38) and in_band(res.naive_err_pct, 30, 58) and elapsed <= 600
    verdict(3, ok, f"naive {res.naive_err_pct:.2f}% aug {res.aug_err_pct:.2f}% in {elapsed:.1f}s")


FAMILIES = [
    (ChainSpec("drift1d", params={"l": 1 / 4, "r": 1 / 4}), 16, 2000),
    (ChainSpec("drift1d", params={"l": 1 / 6, "r": 2 / 6}), 16, 2000),
    (ChainSpec("drift1d", params={"l": 0.0, "r": 1 / 2}), 16, 2000),
    (ChainSpec("skip1d"), 16, 2000),
    (ChainSpec("complete1d"), 16, 2000),
    (ChainSpec("unif2d"), 12, 500),
    (ChainSpec("nonunif2d"), 12, 500),
    (ChainSpec("unif3d"), 4, 500),
    (ChainSpec("nonunif3d"), 4, 500),
]


def test_criterion_4_universal_improvement(verdict):
    worse = []
    for spec, n, trials in FAMILIES:
        res = run_experiment(ExperimentConfig(spec, "sine", N=n, trials=trials))
        if res.aug_err_pct > res.naive_err_pct:
            worse.append(f"{spec.chain_id} ({res.aug_err_pct:.2f} > {res.naive_err_pct:.2f})")
    verdict(4, not worse, f"{len(FAMILIES) - len(worse)}/{len(FAMILIES)} families improved" + "; ".join([""] + worse))


def test_criterion_5_symmetric_noise_residual_norm(verdict):
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    min_beta = np.inf
    worst_identity = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        a, ens = two_atom_ensemble(rng, n)
        beta = optimal_beta_exact(ens, a, InverseShrink(), residual_norm_matrix(a), np.eye(n))
        min_beta = min(min_beta, beta)
        y = (ens.atoms[0] - a) @ np.linalg.inv(a)
        lhs, rhs = trace_identity_sides(y)
        worst_identity = max(worst_identity, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    elapsed = time.perf_counter() - start
    ok = min_beta >= -1e-9 and worst_identity <= 1e-9 and elapsed <= 10
    verdict(5, ok, f"min beta* {min_beta:.3e}, worst identity rel err {worst_identity:.1e}, {elapsed:.1f}s")


def test_criterion_6_anisotropic_reduction(verdict):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 6))
        a, ens = two_atom_ensemble(rng, n)
        b = residual_norm_matrix(a)
        r = random_spd(rng, n)
        aniso = optimal_beta_exact(ens, a, AutocorrelationShrink(np.linalg.inv(r)), b, r)
        iso = optimal_beta_exact(ens, a, InverseShrink(), b, np.eye(n))
        worst = max(worst, abs(aniso - iso) / abs(iso))
    verdict(6, worst <= 1e-10, f"worst relative gap between the two beta* values {worst:.3e}")


def test_criterion_7_counterexamples(verdict):
    ks = [0.5, -0.5, 2, -2, 5, -5, 10, -10]
    eigs = [anisotropy_mineig(k) for k in ks]
    aniso = anisotropy_beta(100, (2, -1)).beta_star
    mask = masking_beta(1000).beta_star
    l2_frob = l2_counterexample_beta(0.01, "frobenius").beta_star
    l2_res = l2_counterexample_beta(0.01, "residual").beta_star
    checks = {
        "mineig<0": all(e < 0 for e in eigs),
        "mineig(0)=0": anisotropy_mineig(0) == 0,
        "anisotropy": -1.1 < aniso < -0.9,
        "masking": abs(mask + 1) <= 0.01,
        "l2 frobenius": l2_frob < 0,
        "l2 residual": l2_res >= -1e-9,
    }
    failed = [name for name, ok in checks.items() if not ok]
    detail = (
        f"max mineig {max(eigs):.3e}, anisotropy {aniso:.4f}, masking {mask:.4f}, "
        f"l2 {l2_frob:.4g} / {l2_res:.4g}"
    )
    verdict(7, not failed, detail + (f"; failed {failed}" if failed else ""))


def test_criterion_8_small_noise(verdict):
    rng = np.random.default_rng(8)
    min_sv = min(second_variation(rng.standard_normal((n, n))) for n in rng.integers(1, 8, size=1000))
    max_anti = 0.0
    for _ in range(100):
        g = rng.standard_normal((5, 5))
        max_anti = max(max_anti, second_variation(g - g.T))
    y = rng.standard_normal((4, 4))
    rem = [abs(symmetric_pair_sum(t * y) - t * t * second_variation(y)) for t in (0.02, 0.01)]
    ratio = rem[0] / rem[1]
    ok = min_sv >= 0 and max_anti <= 1e-12 and 8 <= ratio <= 32
    verdict(8, ok, f"min second variation {min_sv:.3e}, antisymmetric max {max_anti:.1e}, remainder ratio {ratio:.2f}")


def test_criterion_9_estimator_consistency(verdict):
    scalar = MatrixEnsemble.from_atoms([[[1.5]], [[0.5]]])
    mc = bootstrap_beta_mc([[1.0]], scalar, 100_000, [[1.0]], np.random.default_rng(9), full_output=True)
    mc_ok = abs(mc.beta - 0.4) <= 3 * mc.stderr

    rng = np.random.default_rng(90)
    a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    noise_atoms = []
    for _ in range(10):
        z = 0.15 * rng.standard_normal((4, 4))
        noise_atoms += [z, -z]
    exact = optimal_beta_exact(
        MatrixEnsemble.from_atoms([a + z for z in noise_atoms]), a, InverseShrink(), residual_norm_matrix(a), np.eye(4)
    )
    taylor = bootstrap_beta_taylor(
        a, MatrixEnsemble.from_atoms(noise_atoms), 20_000, np.eye(4), rng, full_output=True
    )
    taylor_ok = abs(taylor.beta - exact) <= 0.1 * abs(exact) + 3 * taylor.stderr
    verdict(
        9,
        mc_ok and taylor_ok,
        f"MC {mc.beta:.4f} +- {mc.stderr:.4f} vs 0.4; Taylor {taylor.beta:.4f} +- {taylor.stderr:.4f} vs exact {exact:.4f}",
    )


def test_criterion_10_overshoot(verdict):
    out = overshoot_demo(2.0, 0.5, 1_000_000, np.random.default_rng(10), full_output=True)
    ok = abs(out.mean_of_inverse - 2.0) <= 3 * out.stderr and out.inverse_of_mean == pytest.approx(1.0)
    verdict(10, ok, f"E[1/X] {out.mean_of_inverse:.4f} +- {out.stderr:.4f}, 1/E[X] {out.inverse_of_mean:.3f}")
