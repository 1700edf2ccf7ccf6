"""Integral estimators: Monte Carlo, maximum-variance BQ, and the two-batch MVS-MC.

All three strategies share one random-stream convention so that degenerate
splits reproduce the plain strategies draw for draw: a trial's ``rng`` first
supplies the uniform initial design points (MVS batch), then the weight samples
of the MC batch.  Observation noise comes from the ``NoisyOracle``'s own stream
and is consumed in query order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as _sp_integrate
from scipy import linalg
from scipy.special import gammainc
from scipy.stats import qmc as _qmc

from noisybq import oracle as _oracle
from noisybq.gp import DEFAULT_BOUNDS, GpState, fit_hyperparams
from noisybq.integrands import NoisyOracle, WeightDensity
from noisybq.kernel import KernelSpec, as_points, kernel_cross_matrix, kernel_expansion, matern_correlation
from noisybq._kernels_py import half_integer_coefficients

KINDS = ("mc", "mvs", "mvs-mc")
QMC_LOG2 = 17  # 131072 points for posterior-mean integrals off the closed-form path


@dataclass(frozen=True)
class StrategyConfig:
    kind: str
    T: int
    split: float = 0.5
    interleave: bool = True
    candidate_count: int | None = None  # None -> 2048 * d
    gamma: float = 1.0
    n_init: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {KINDS}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0.0 <= self.split <= 1.0:
            raise ValueError("split must lie in [0, 1]")
        if self.candidate_count is not None and self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.n_init < 0:
            raise ValueError("n_init must be >= 0")

    @property
    def rho(self) -> float:
        return {"mc": 0.0, "mvs": 1.0}.get(self.kind, self.split)

    @property
    def label(self) -> str:
        return self.kind if self.kind != "mvs-mc" else f"mvs-mc@{self.split:g}"


@dataclass(frozen=True)
class GpConfig:
    """Kernel and regularizer for the MVS batch.

    ``lam=None`` means lam = max(sigma^2, lam_floor).  With ``fit`` the kernel
    is refit once per trial on the initial design by marginal likelihood
    (``kernel`` then only seeds nu and serves before the fit).
    """

    kernel: KernelSpec | None = None
    lam: float | None = None
    lam_floor: float = 1e-10
    fit: bool = False
    nu_fixed: float = 1.5
    bounds: tuple = DEFAULT_BOUNDS

    def __post_init__(self):
        if self.kernel is None and not self.fit:
            raise ValueError("GpConfig needs a kernel unless fit=True")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be > 0")

    def lam_for(self, sigma: float) -> float:
        return self.lam if self.lam is not None else max(sigma * sigma, self.lam_floor)

    def prior_kernel(self) -> KernelSpec:
        if self.kernel is not None:
            return self.kernel
        return KernelSpec(self.nu_fixed, 0.1, 1.0)


@dataclass
class EstimateTrace:
    kind: str
    checkpoints: np.ndarray
    estimates: np.ndarray
    I1s: np.ndarray
    residuals: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    is_mvs: np.ndarray
    kernel: KernelSpec | None = None
    lam: float | None = None
    n_init: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def estimate(self) -> float:
        return float(self.estimates[-1])

    @property
    def I1(self) -> float:
        return float(self.I1s[-1])

    @property
    def R_hat(self) -> float:
        return float(self.residuals[-1])

    @property
    def mvs_xs(self) -> np.ndarray:
        return self.xs[self.is_mvs]

    @property
    def mc_xs(self) -> np.ndarray:
        return self.xs[~self.is_mvs]

    @property
    def init_xs(self) -> np.ndarray:
        return self.mvs_xs[: self.n_init]


def _checkpoints(T: int, checkpoints) -> np.ndarray:
    if checkpoints is None:
        return np.arange(1, T + 1)
    cps = np.unique(np.asarray(list(checkpoints), dtype=int))
    cps = cps[(cps >= 1) & (cps <= T)]
    if cps.size == 0 or cps[-1] != T:
        cps = np.append(cps, T)
    return cps


def mvs_count(rho: float, t: int) -> int:
    """MVS draws among the first t under split rho (round half up)."""
    return min(t, int(math.floor(rho * t + 0.5)))


def schedule(rho: float, T: int, interleave: bool) -> np.ndarray:
    """Boolean mask over positions 1..T: True where the draw belongs to the MVS batch."""
    n_mvs = mvs_count(rho, T)
    if not interleave:
        return np.arange(T) < n_mvs
    counts = np.array([mvs_count(rho, t) for t in range(T + 1)])
    return np.diff(counts) > 0


# --- kernel means ---------------------------------------------------------------

@lru_cache(maxsize=8)
def _qmc_nodes(d: int) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = _qmc.Sobol(d, scramble=True, seed=np.random.default_rng(0)).random_base2(QMC_LOG2)
    pts.setflags(write=False)
    return pts


def _uniform_1d_mean(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    """int_0^1 k(x, t) dt for every x, exactly for half-integer nu."""
    c = math.sqrt(2 * spec.nu) / spec.lengthscale
    ua, ub = c * x, c * (1.0 - x)
    coef = half_integer_coefficients(spec.nu)
    if coef is not None:
        # int_0^U u^j e^-u du = j! P(j+1, U)
        def G(U):
            return sum(cj * math.factorial(j) * gammainc(j + 1, U) for j, cj in enumerate(coef))
    else:
        def G(U):
            out = np.empty_like(U)
            for i, u in enumerate(U):
                out[i] = _sp_integrate.quad(lambda s: float(matern_correlation(spec.nu, s)), 0.0, u, limit=200)[0] if u > 0 else 0.0
            return out
    return spec.scale / c * (G(ua) + G(ub))


class KernelMean:
    """z(x) = int p(u) k(x, u) du for a fixed kernel and weight."""

    def __init__(self, spec: KernelSpec, weight: WeightDensity):
        self.spec = spec
        self.weight = weight
        self.exact = weight.is_uniform and weight.dim == 1
        if not self.exact:
            nodes = _qmc_nodes(weight.dim)
            self._nodes = nodes
            self._wts = weight.density(nodes) / nodes.shape[0]

    def __call__(self, points) -> np.ndarray:
        pts = as_points(points, d=self.weight.dim)
        if pts.shape[0] == 0:
            return np.zeros(0)
        if self.exact:
            return _uniform_1d_mean(self.spec, pts[:, 0])
        return kernel_expansion(self.spec, self._nodes, self._wts, pts)


def integrate_posterior_mean(state: GpState, weight: WeightDensity, abs_tol: float = 1e-8) -> float:
    """int p mu_t: adaptive quadrature for d = 1 with uniform weight, QMC otherwise."""
    if state.t == 0:
        return 0.0
    if weight.dim != state.dim:
        raise ValueError("weight and GP dimensions differ")
    if weight.is_uniform and state.dim == 1:
        cfg = _oracle.OracleConfig(method="adaptive-1d", abs_tol=abs_tol,
                                   breakpoints=tuple(np.unique(state.xs[:, 0])))
        return _oracle.integrate_box(lambda x: state.posterior_mean(x), [0.0], [1.0], cfg).value
    nodes = _qmc_nodes(state.dim)
    return float(np.mean(state.posterior_mean(nodes) * weight.density(nodes)))


def residual_variance_bound(p_max: float, T_second: int, l2_err_sq: float, sigma: float) -> float:
    """(4 p_max / T) ||f - mu||^2 + 2 sigma^2 / T with T = 2 * T_second the full budget."""
    if min(p_max, l2_err_sq, sigma) < 0 or T_second < 1:
        raise ValueError("inputs must be nonnegative and T_second >= 1")
    T = 2 * T_second
    return 4.0 * p_max * l2_err_sq / T + 2.0 * sigma * sigma / T


# --- maximum-variance selection --------------------------------------------------

def candidate_grid(d: int, n: int | None = None) -> np.ndarray:
    """First n points of the unscrambled Sobol sequence (default n = 2048 d)."""
    n = 2048 * d if n is None else int(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _qmc.Sobol(d, scramble=False).random(n)


def _gamma_argmax(var: np.ndarray, gamma: float) -> int:
    top = float(var.max())
    if gamma >= 1.0:
        return int(np.argmax(var))
    return int(np.flatnonzero(var >= gamma * gamma * top)[0])


def select_max_variance(state: GpState, candidates, gamma: float = 1.0) -> np.ndarray:
    """Candidate with sigma >= gamma * max sigma (lowest such index)."""
    cands = as_points(candidates, d=state.dim)
    if cands.shape[0] == 0:
        raise ValueError("no candidates")
    return cands[_gamma_argmax(state.posterior_var(cands), gamma)].copy()


class VarianceTracker:
    """Posterior variance on a fixed candidate set, updated in O(t N) per point.

    Keeps W = L^{-1} K(X, C); a new Cholesky row (l, dd) adds the row
    v = (k(x, C) - l W) / dd and subtracts v^2 from the variances.
    """

    def __init__(self, state: GpState, candidates: np.ndarray):
        self.candidates = candidates
        self.rebuild(state)

    def rebuild(self, state: GpState) -> None:
        self.state = state
        C = self.candidates
        self.var = np.full(C.shape[0], state.spec.scale)
        self.W = np.zeros((max(16, 2 * state.t), C.shape[0]))
        if state.t:
            W = linalg.solve_triangular(state.chol, kernel_cross_matrix(state.spec, state.xs, C), lower=True)
            self.var -= np.einsum("ij,ij->j", W, W)
            self.W[: state.t] = W

    def push(self, new_state: GpState) -> None:
        old = self.state
        t = old.t
        if new_state.jitter != old.jitter or new_state.spec != old.spec or new_state.t != t + 1:
            self.rebuild(new_state)
            return
        if t == self.W.shape[0]:
            self.W = np.vstack([self.W, np.zeros_like(self.W)])
        l = new_state.chol[t, :t]
        dd = new_state.chol[t, t]
        v = kernel_cross_matrix(new_state.spec, new_state.xs[t:t + 1], self.candidates)[0]
        if t:
            v -= l @ self.W[:t]
        v /= dd
        self.var -= v * v
        self.W[t] = v
        self.state = new_state

    def select(self, gamma: float = 1.0) -> np.ndarray:
        return self.candidates[_gamma_argmax(np.maximum(self.var, 0.0), gamma)].copy()


# --- strategies ------------------------------------------------------------------

def run_mc(oracle: NoisyOracle, weight: WeightDensity, T: int, rng: np.random.Generator, checkpoints=None) -> EstimateTrace:
    """Plain Monte Carlo: mean of y_t over x_t ~ p."""
    if T < 1:
        raise ValueError("T must be >= 1")
    xs = weight.sample(rng, T)
    ys = np.array([oracle.query(x) for x in xs])
    cps = _checkpoints(T, checkpoints)
    # incremental mean: exact for constant data, unlike cumsum / t
    running = np.empty(T)
    m = 0.0
    for t, y in enumerate(ys, 1):
        m += (y - m) / t
        running[t - 1] = m
    est = running[cps - 1]
    zeros = np.zeros(cps.size)
    return EstimateTrace("mc", cps, est, zeros, est.copy(), xs, ys, np.zeros(T, bool))


def run_mvs(oracle: NoisyOracle, weight: WeightDensity, T: int, gp_config: GpConfig, rng: np.random.Generator,
            checkpoints=None, n_init: int = 3, candidate_count: int | None = None, gamma: float = 1.0) -> EstimateTrace:
    """Maximum-variance sampling for all T draws; estimate = int p mu_T."""
    cfg = StrategyConfig("mvs", T, 1.0, False, candidate_count, gamma, n_init)
    return _run(oracle, weight, cfg, gp_config, rng, checkpoints)


def run_mvs_mc(oracle: NoisyOracle, weight: WeightDensity, config: StrategyConfig, rng: np.random.Generator,
               gp_config: GpConfig | None = None, checkpoints=None) -> EstimateTrace:
    """Two-batch estimator: MVS batch builds mu, MC batch estimates the residual."""
    if config.kind == "mc" or config.rho == 0.0:
        trace = run_mc(oracle, weight, config.T, rng, checkpoints)
        trace.kind = config.kind
        return trace
    if gp_config is None:
        raise ValueError("MVS strategies need a GpConfig")
    return _run(oracle, weight, config, gp_config, rng, checkpoints)


def run_strategy(oracle, weight, config: StrategyConfig, rng, gp_config=None, checkpoints=None) -> EstimateTrace:
    if config.kind == "mc":
        return run_mc(oracle, weight, config.T, rng, checkpoints)
    return run_mvs_mc(oracle, weight, config, rng, gp_config, checkpoints)


def _run(oracle, weight, cfg: StrategyConfig, gp_config: GpConfig, rng, checkpoints) -> EstimateTrace:
    d = weight.dim
    if oracle.dim != d:
        raise ValueError("integrand and weight dimensions differ")
    T = cfg.T
    mask = schedule(cfg.rho, T, cfg.interleave)
    n_mvs = int(mask.sum())
    n_init = min(cfg.n_init, n_mvs)
    init = rng.random((n_init, d))
    mc_pts = weight.sample(rng, T - n_mvs) if T > n_mvs else np.zeros((0, d))
    cands = candidate_grid(d, cfg.candidate_count)
    cps = _checkpoints(T, checkpoints)
    cp_set = set(cps.tolist())

    lam = gp_config.lam_for(oracle.sigma)
    spec = gp_config.prior_kernel()
    state = GpState.empty(spec, lam, d)
    tracker = None
    kmean = KernelMean(spec, weight)
    z = np.zeros(0)

    xs = np.zeros((T, d))
    ys = np.zeros(T)
    est, i1s, res = [], [], []
    n_seen_mvs = n_seen_mc = 0
    for t in range(1, T + 1):
        if mask[t - 1]:
            if n_seen_mvs < n_init:
                x = init[n_seen_mvs]
            else:
                if tracker is None:
                    tracker = VarianceTracker(state, cands)
                x = tracker.select(cfg.gamma)
            y = oracle.query(x)
            n_seen_mvs += 1
            if gp_config.fit and n_seen_mvs == n_init and n_init >= 3:
                xs_mvs = np.vstack([xs[:t - 1][mask[:t - 1]], x[None, :]])
                ys_mvs = np.append(ys[:t - 1][mask[:t - 1]], y)
                spec = fit_hyperparams(xs_mvs, ys_mvs, gp_config.nu_fixed, lam, gp_config.bounds)
                state = GpState.from_data(spec, lam, xs_mvs, ys_mvs)
                kmean = KernelMean(spec, weight)
                z = kmean(state.xs)
                tracker = None
            else:
                state = state.extend(x, y)
                z = np.append(z, kmean(x[None, :]))
                if tracker is not None:
                    tracker.push(state)
        else:
            x = mc_pts[n_seen_mc]
            y = oracle.query(x)
            n_seen_mc += 1
        xs[t - 1] = x
        ys[t - 1] = y
        if t in cp_set:
            I1 = float(z @ state.alpha) if state.t else 0.0
            if n_seen_mc:
                mc_x = xs[:t][~mask[:t]]
                mu = state.posterior_mean(mc_x) if state.t else np.zeros(n_seen_mc)
                R = float(np.mean(ys[:t][~mask[:t]] - mu))
            else:
                R = 0.0
            i1s.append(I1)
            res.append(R)
            est.append(I1 + R)

    return EstimateTrace(
        cfg.kind, cps, np.array(est), np.array(i1s), np.array(res), xs, ys, mask.copy(),
        kernel=state.spec, lam=lam, n_init=n_init, extras={"gp": state},
    )
