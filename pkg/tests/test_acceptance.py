"""Acceptance gate: the ten end-to-end criteria, each at its stated tolerance.

Every test appends one PASS/FAIL line to the terminal summary (and prints it),
then asserts.  Run alone with ``pytest tests/test_acceptance.py -m acceptance``.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from noisybq import oracle
from noisybq.gp import ConfidenceBand, GpState
from noisybq.harness import ExperimentConfig, aggregate, fit_all, run_experiment, split_sweep
from noisybq.integrands import (
    NoisyOracle, SignGame, make_bump_class, make_synthetic, make_weight, sign_game_query, synthetic_from,
)
from noisybq.kernel import KernelSpec, kernel_expansion, matern_correlation
from noisybq.quadrature import GpConfig, StrategyConfig, residual_variance_bound, run_mvs, run_mvs_mc

pytestmark = pytest.mark.acceptance

SYNTH = KernelSpec(1.5, 0.03, 2.0)
UNIFORM = make_weight("uniform", d=1)


def report(n, name, passed, detail, elapsed, budget):
    line = f"[{'PASS' if passed else 'FAIL'}] {n:>2}. {name}: {detail} ({elapsed:.1f}s, budget {budget}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def fixed_first_batch(f, sigma, seed, half=50):
    """Run the MVS half of the two-batch estimator once; return its GP state."""
    cfg = StrategyConfig("mvs-mc", 2 * half, 0.5, interleave=False)
    noise = NoisyOracle(f, sigma, np.random.default_rng(seed + 1))
    trace = run_mvs_mc(noise, UNIFORM, cfg, np.random.default_rng(seed), GpConfig(kernel=SYNTH))
    state = trace.extras["gp"]
    assert state.t == half
    return state


def residual_draws(f, state, sigma, n_rep, half, rng, chunk=10_000):
    """R-hat for n_rep independent second batches of size ``half``."""
    out = np.empty(n_rep)
    alpha = state.alpha
    for start in range(0, n_rep, chunk):
        m = min(chunk, n_rep - start)
        x = rng.random((m * half, 1))
        fx = f(x)
        mu = kernel_expansion(state.spec, state.xs, alpha, x)
        y = fx + sigma * rng.standard_normal(m * half)
        out[start:start + m] = (y - mu).reshape(m, half).mean(axis=1)
    return out


def test_01_residual_unbiasedness():
    start = time.perf_counter()
    f = make_synthetic(1, SYNTH, np.random.default_rng(2024))
    state = fixed_first_batch(f, 0.1, seed=7)
    R = oracle.integrate_box(
        lambda x: f(x) - state.posterior_mean(x), [0.0], [1.0],
        oracle.OracleConfig(method="adaptive-1d", abs_tol=1e-10,
                            breakpoints=tuple(np.concatenate([state.xs[:, 0], f.breakpoints]))),
    ).value
    draws = residual_draws(f, state, 0.1, 100_000, 50, np.random.default_rng(99))
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    gap = abs(draws.mean() - R)
    elapsed = time.perf_counter() - start
    ok = gap <= 3 * se and elapsed < 60
    assert report(1, "residual unbiasedness", ok, f"|mean(R_hat) - R| = {gap:.3g} vs 3 SE = {3 * se:.3g}",
                  elapsed, 60)


def test_02_residual_variance_bound():
    start = time.perf_counter()
    grid = (np.arange(10_000) + 0.5) / 10_000
    results = []
    for cfg_id in range(20):
        f = make_synthetic(1, SYNTH, np.random.default_rng(1000 + cfg_id))
        state = fixed_first_batch(f, 0.1, seed=5000 + cfg_id)
        l2 = float(np.mean((f(grid) - state.posterior_mean(grid)) ** 2))
        draws = residual_draws(f, state, 0.1, 10_000, 50, np.random.default_rng(9000 + cfg_id))
        bound = residual_variance_bound(UNIFORM.p_max, 50, l2, 0.1)
        results.append((draws.var(ddof=1), bound))
    passed = sum(v <= b for v, b in results)
    worst = max(v / b for v, b in results)
    elapsed = time.perf_counter() - start
    ok = passed == 20 and elapsed < 120
    assert report(2, "residual variance bound", ok, f"{passed}/20 configurations, worst Var/bound = {worst:.3f}",
                  elapsed, 120)


def _slope(fits, prefix):
    return next(f.slope for f in fits if f.strategy.startswith(prefix))


def test_03_noise_dominated_slope():
    start = time.perf_counter()
    T = 1024
    cfg = ExperimentConfig(
        "constant:0.3", (StrategyConfig("mc", T), StrategyConfig("mvs-mc", T)), (0.5,), T,
        kernel=KernelSpec(1.5, 0.1, 1.0), checkpoints=tuple(2**k for k in range(4, 11)), n_trials=200, root_seed=3,
    )
    fits = fit_all(aggregate(run_experiment(cfg)), 16)
    mc, mvsmc = _slope(fits, "mc"), _slope(fits, "mvs-mc")
    elapsed = time.perf_counter() - start
    ok = abs(mc + 0.5) <= 0.15 and abs(mvsmc + 0.5) <= 0.15 and elapsed < 120
    assert report(3, "noise-dominated slope", ok, f"MC {mc:.3f}, MVS-MC {mvsmc:.3f} (target -0.5 +- 0.15)",
                  elapsed, 120)


def test_04_low_noise_separation():
    start = time.perf_counter()
    T = 512
    cfg = ExperimentConfig(
        "synthetic:d=1,seed=0,nu=1.5,l=0.03,scale=2", (StrategyConfig("mc", T), StrategyConfig("mvs-mc", T)),
        (1e-6,), T, kernel=SYNTH, checkpoints=tuple(2**k for k in range(4, 10)), n_trials=100, root_seed=4,
    )
    fits = fit_all(aggregate(run_experiment(cfg)), 16)
    mc, mvsmc = _slope(fits, "mc"), _slope(fits, "mvs-mc")
    elapsed = time.perf_counter() - start
    ok = mvsmc <= -1.0 and mvsmc <= mc - 0.3 and abs(mc + 0.5) <= 0.15 and elapsed < 300
    assert report(4, "low-noise separation", ok,
                  f"MVS-MC {mvsmc:.3f} (asymptotic target -2.5), MC {mc:.3f}", elapsed, 300)


def test_05_qualitative_ordering():
    start = time.perf_counter()
    T = 250
    cfg = ExperimentConfig(
        "benchmark:alpine:1", (StrategyConfig("mc", T), StrategyConfig("mvs", T), StrategyConfig("mvs-mc", T)),
        (0.001, 0.1), T, fit_hyperparams=True, checkpoints=(T,), n_trials=100, root_seed=5,
    )
    rows = {(r.strategy, r.sigma): r.mean for r in aggregate(run_experiment(cfg))}
    low = rows[("mvs", 0.001)] <= rows[("mc", 0.001)]
    high = rows[("mvs-mc@0.5", 0.1)] <= rows[("mvs", 0.1)]
    elapsed = time.perf_counter() - start
    detail = (f"sigma=0.001: MVS {rows[('mvs', 0.001)]:.3g} vs MC {rows[('mc', 0.001)]:.3g} "
              f"[{'ok' if low else 'violated'}]; sigma=0.1: MVS-MC {rows[('mvs-mc@0.5', 0.1)]:.3g} vs "
              f"MVS {rows[('mvs', 0.1)]:.3g} [{'ok' if high else 'violated'}]")
    assert report(5, "qualitative ordering", low and high and elapsed < 300, detail, elapsed, 300)


def test_06_confidence_band_coverage():
    start = time.perf_counter()
    spec = KernelSpec(1.5, 0.2, 1.0)
    f = synthetic_from(spec, [[0.15], [0.4], [0.7], [0.9]], [0.8, -0.5, 0.6, -0.3])
    sigma, delta = 0.1, 0.1
    band = ConfidenceBand(B=f.rkhs_norm_bound, R=sigma, delta=delta)
    xs = np.linspace(0.0, 1.0, 12)[:, None]
    base = GpState.from_data(spec, sigma**2, xs)
    x_star = np.array([0.33])
    rng = np.random.default_rng(6)
    violations = 0
    n_rep = 200
    for _ in range(n_rep):
        ys = f(xs) + sigma * rng.standard_normal(xs.shape[0])
        lo, hi = GpState(spec, base.lam, base.xs, ys, base.chol, base.jitter).confidence_bounds(band, x_star)
        violations += not (lo <= f(x_star) <= hi)
    frac = violations / n_rep
    limit = delta + 3 * math.sqrt(delta * (1 - delta) / n_rep)
    elapsed = time.perf_counter() - start
    assert report(6, "confidence-band coverage", frac <= limit and elapsed < 60,
                  f"violation fraction {frac:.3f} <= {limit:.3f}", elapsed, 60)


def test_07_non_adaptivity():
    start = time.perf_counter()
    f = make_synthetic(1, SYNTH, np.random.default_rng(77))
    sequences = set()
    for noise_seed in range(10):
        trace = run_mvs(NoisyOracle(f, 0.1, np.random.default_rng(noise_seed)), UNIFORM, 60,
                        GpConfig(kernel=SYNTH, lam=0.01), np.random.default_rng(123), checkpoints=[60])
        sequences.add(trace.mvs_xs.tobytes())
    elapsed = time.perf_counter() - start
    assert report(7, "non-adaptivity", len(sequences) == 1 and elapsed < 10,
                  f"{len(sequences)} distinct MVS sequence(s) over 10 noise seeds", elapsed, 10)


def test_08_gp_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    spec = KernelSpec(2.5, 0.3, 1.7)
    xs, ys = rng.random((50, 2)), rng.normal(size=50)
    q = rng.random((20, 2))
    state = GpState.empty(spec, 0.05, 2)
    worst_rebuild, worst_mono = 0.0, -np.inf
    prev_var = state.posterior_var(q)
    for t in range(50):
        state = state.extend(xs[t], ys[t])
        ref = GpState.from_data(spec, 0.05, xs[:t + 1], ys[:t + 1])
        for a, b in ((state.posterior_mean(q), ref.posterior_mean(q)), (state.posterior_var(q), ref.posterior_var(q))):
            worst_rebuild = max(worst_rebuild, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-12))))
        var = state.posterior_var(q)
        worst_mono = max(worst_mono, float(np.max(np.sqrt(var) - np.sqrt(prev_var))))
        prev_var = var
    worst_closed = 0.0
    for nu in (0.5, 1.5, 2.5):
        u = np.sqrt(2 * nu) * rng.uniform(1e-6, 5.0, 100)
        closed = matern_correlation(nu, u, "closed")
        bessel = matern_correlation(nu, u, "bessel")
        worst_closed = max(worst_closed, float(np.max(np.abs(closed - bessel) / np.abs(closed))))
    elapsed = time.perf_counter() - start
    ok = worst_rebuild <= 1e-8 and worst_mono <= 1e-10 and worst_closed <= 1e-8 and elapsed < 10
    assert report(8, "GP correctness", ok,
                  f"rebuild rel err {worst_rebuild:.2g}, max sigma increase {worst_mono:.2g}, "
                  f"closed vs Bessel {worst_closed:.2g}", elapsed, 10)


def test_09_hard_instance_consistency():
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(10):
        f, spec = make_bump_class(1, 1.5, 1.0, 16, rng)
        value = oracle.integrate(f).value
        worst = max(worst, abs(value - spec.I0 * spec.signs.sum()))
    game = SignGame.from_bumps(spec, sigma=0.5)
    n = 100_000
    worst_z = 0.0
    for i in (1, spec.M // 2, spec.M):
        draws = np.array([sign_game_query(game, i, rng) for _ in range(n)])
        worst_z = max(worst_z, abs(draws.mean() - game.eps * game.signs[i - 1]) / (game.sigma / math.sqrt(n)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and worst_z <= 3 and elapsed < 60
    assert report(9, "hard-instance consistency", ok,
                  f"max |oracle - I0 sum(signs)| = {worst:.2g}; sign-game max |z| = {worst_z:.2f}", elapsed, 60)


def test_10_split_sweep_endpoints():
    start = time.perf_counter()
    T = 64
    cfg = ExperimentConfig(
        "synthetic:d=1,seed=1,nu=1.5,l=0.03,scale=2", (StrategyConfig("mvs-mc", T),), (0.01,), T, kernel=SYNTH,
        checkpoints=(16, 32, 64), n_trials=10, root_seed=10,
    )
    _, records = split_sweep(cfg, [0.0, 0.5, 1.0])
    ref = run_experiment(cfg.replace(strategies=(StrategyConfig("mc", T), StrategyConfig("mvs", T))))

    def errors(recs, label):
        return [r.errors for r in recs if r.strategy == label]

    same_mc = errors(records, "mvs-mc@0") == errors(ref, "mc")
    same_mvs = errors(records, "mvs-mc@1") == errors(ref, "mvs")
    elapsed = time.perf_counter() - start
    assert report(10, "split-sweep endpoints", same_mc and same_mvs and elapsed < 60,
                  f"rho=0 == MC: {same_mc}; rho=1 == MVS: {same_mvs}", elapsed, 60)
