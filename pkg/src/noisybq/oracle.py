"""Reference integration of deterministic integrands (the ground truth for MAE).

Deliberately independent of the Bayesian-quadrature code paths: adaptive
Gauss-Kronrod for d = 1, tensor Gauss-Legendre for d in {2, 3}, randomized QMC
otherwise.  Failure to reach the tolerance is reported through
``OracleResult.converged``, never raised.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc as _qmc

# 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1]
# (nodes listed for x >= 0, largest first; the last node is 0).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS_ON_KRONROD = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes +-x[1], +-x[3], +-x[5] and 0.
for _k, _w in zip((1, 3, 5), _WG[:3]):
    GAUSS_WEIGHTS_ON_KRONROD[_k] = _w
    GAUSS_WEIGHTS_ON_KRONROD[14 - _k] = _w
GAUSS_WEIGHTS_ON_KRONROD[7] = _WG[3]

DEFAULT_TOL = {"adaptive-1d": 1e-10, "tensor-gauss": 1e-8, "qmc": 1e-4}
METHODS = tuple(DEFAULT_TOL)


@dataclass(frozen=True)
class OracleConfig:
    method: str | None = None
    abs_tol: float | None = None
    points_budget: int = 10**6
    panels: int | None = None
    breakpoints: tuple[float, ...] | None = None
    randomizations: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.method is not None and self.method not in METHODS:
            raise ValueError(f"unknown oracle method {self.method!r}; choose from {METHODS}")
        if self.abs_tol is not None and not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")

    def resolve(self, d: int) -> tuple[str, float]:
        method = self.method
        if method is None:
            method = "adaptive-1d" if d == 1 else "tensor-gauss" if d <= 3 else "qmc"
        if method == "adaptive-1d" and d != 1:
            raise ValueError("adaptive-1d needs d = 1")
        if method == "tensor-gauss" and d > 3:
            raise ValueError("tensor-gauss is limited to d <= 3")
        if method == "qmc" and self.points_budget < 10**4:
            raise ValueError("qmc needs a points budget of at least 1e4")
        return method, self.abs_tol if self.abs_tol is not None else DEFAULT_TOL[method]


@dataclass(frozen=True)
class OracleResult:
    value: float
    err_estimate: float
    converged: bool
    method: str
    n_evals: int

    def __iter__(self):
        yield self.value
        yield self.err_estimate


def _kronrod_batch(fn1d, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * KRONROD_NODES[None, :]
    fx = np.asarray(fn1d(x.reshape(-1)), dtype=float).reshape(x.shape)
    k15 = half * (fx @ KRONROD_WEIGHTS)
    g7 = half * (fx @ GAUSS_WEIGHTS_ON_KRONROD)
    return k15, np.abs(k15 - g7)


def adaptive_gauss_kronrod(
    fn1d: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    abs_tol: float = 1e-10,
    max_evals: int = 10**6,
    breakpoints=None,
    initial_panels: int = 4,
) -> OracleResult:
    """Globally adaptive G7-K15 bisection on [a, b].

    ``fn1d`` takes a 1-D array of abscissae.  Intervals with the largest error
    estimates are bisected in batches until the summed estimate is below
    ``abs_tol`` or the evaluation budget is spent.
    """
    edges = set(np.linspace(a, b, initial_panels + 1).tolist())
    if breakpoints is not None:
        edges.update(float(p) for p in breakpoints if a < p < b)
    edges = np.array(sorted(edges))
    lo, hi = edges[:-1], edges[1:]
    vals, errs = _kronrod_batch(fn1d, lo, hi)
    n_evals = 15 * lo.size
    heap = [(-e, l, h, v) for e, l, h, v in zip(errs, lo, hi, vals)]
    heapq.heapify(heap)
    total_err = float(errs.sum())
    min_width = 1e-13 * max(1.0, abs(b - a))
    while total_err > abs_tol and n_evals < max_evals:
        batch = []
        threshold = -heap[0][0] * 0.1
        while heap and len(batch) < 64 and -heap[0][0] >= threshold:
            item = heapq.heappop(heap)
            if item[2] - item[1] <= min_width:
                batch.append(None)
                heapq.heappush(heap, item)
                break
            batch.append(item)
        batch = [item for item in batch if item is not None]
        if not batch:
            break
        l = np.array([item[1] for item in batch])
        h = np.array([item[2] for item in batch])
        m = 0.5 * (l + h)
        v, e = _kronrod_batch(fn1d, np.concatenate([l, m]), np.concatenate([m, h]))
        n_evals += 15 * v.size
        for j, item in enumerate(batch):
            total_err -= -item[0]
        for lo_j, hi_j, v_j, e_j in zip(np.concatenate([l, m]), np.concatenate([m, h]), v, e):
            heapq.heappush(heap, (-e_j, lo_j, hi_j, v_j))
            total_err += e_j
    value = math.fsum(item[3] for item in heap)
    err = math.fsum(-item[0] for item in heap)
    return OracleResult(value, err, err <= abs_tol, "adaptive-1d", n_evals)


def _gauss_panels(order: int, lo: float, hi: float, panels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = panels
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).reshape(-1)
    w = (half[:, None] * weights[None, :]).reshape(-1)
    return x, w


def tensor_gauss(
    fn: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    orders: tuple[int, int] = (32, 48),
    panels: int = 1,
    breakpoints=None,
) -> tuple[float, float, int]:
    """Composite tensor Gauss-Legendre at two orders; returns (value, |difference|, evals)."""
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    d = lo.size
    estimates = []
    n_evals = 0
    for order in orders:
        axes = []
        for k in range(d):
            edges = set(np.linspace(lo[k], hi[k], panels + 1).tolist())
            if breakpoints is not None:
                edges.update(float(p) for p in breakpoints if lo[k] < p < hi[k])
            axes.append(_gauss_panels(order, lo[k], hi[k], np.array(sorted(edges))))
        grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
        wgrid = np.ones_like(grids[0])
        for k, ax in enumerate(axes):
            shape = [1] * d
            shape[k] = -1
            wgrid = wgrid * ax[1].reshape(shape)
        pts = np.stack([g.reshape(-1) for g in grids], axis=1)
        vals = np.asarray(fn(pts), float)
        estimates.append(float(np.dot(vals, wgrid.reshape(-1))))
        n_evals += pts.shape[0]
    return estimates[-1], abs(estimates[-1] - estimates[0]), n_evals


def randomized_qmc(
    fn: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    budget: int = 10**6,
    randomizations: int = 8,
    seed: int = 0,
) -> tuple[float, float, int]:
    """Mean over independently scrambled Sobol sets; error = standard error across them."""
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    d = lo.size
    m = int(math.floor(math.log2(budget / randomizations)))
    vol = float(np.prod(hi - lo))
    seeds = np.random.SeedSequence(seed).spawn(randomizations)
    means = []
    for ss in seeds:
        sampler = _qmc.Sobol(d, scramble=True, seed=np.random.default_rng(ss))
        u = sampler.random_base2(m)
        means.append(vol * float(np.mean(fn(lo + u * (hi - lo)))))
    means = np.array(means)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(randomizations)), randomizations * 2**m


def integrate_box(fn, lo, hi, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Integrate a vectorized ``fn`` over the box [lo, hi] (points as rows)."""
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    d = lo.size
    method, tol = cfg.resolve(d)
    if method == "adaptive-1d":
        return adaptive_gauss_kronrod(
            lambda x: fn(x.reshape(-1, 1)), float(lo[0]), float(hi[0]), tol, cfg.points_budget, cfg.breakpoints
        )
    if method == "tensor-gauss":
        panels = cfg.panels
        if panels is None:
            # both orders together must fit the budget
            per_axis = (cfg.points_budget / (1.0 + (32 / 48) ** d)) ** (1.0 / d)
            panels = max(1, int(per_axis // 48))
        value, err, n = tensor_gauss(fn, lo, hi, panels=panels, breakpoints=cfg.breakpoints)
        return OracleResult(value, err, err <= tol, method, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value, err, n = randomized_qmc(fn, lo, hi, cfg.points_budget, cfg.randomizations, cfg.seed)
    return OracleResult(value, err, err <= tol, method, n)


def integrate(f, weight=None, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Integral of ``f * p`` over [0, 1]^d.

    ``f`` is a vectorized callable with a ``dim`` attribute; ``weight`` (a
    ``WeightDensity``) defaults to the uniform density.  Integrand breakpoints
    (``f.breakpoints``) are used when the config does not give its own.
    """
    d = int(f.dim)
    if weight is None or getattr(weight, "is_uniform", False):
        fn = f
    else:
        def fn(x):
            return f(x) * weight.density(x)
    if cfg.breakpoints is None and getattr(f, "breakpoints", None) is not None:
        cfg = OracleConfig(**{**cfg.__dict__, "breakpoints": tuple(f.breakpoints)})
    return integrate_box(fn, np.zeros(d), np.ones(d), cfg)
