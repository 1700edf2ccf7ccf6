"""Gaussian-process posterior with a ridge regularizer ``lam`` on the kernel matrix.

The posterior mean and variance after observing ``(xs, ys)`` are

    mu(x)      = k_t(x)^T (K_t + lam I)^{-1} y_t
    sigma^2(x) = k(x, x) - k_t(x)^T (K_t + lam I)^{-1} k_t(x)

computed from a lower Cholesky factor of ``K_t + lam I``.  The variance never
reads ``ys``, which is what makes maximum-variance sampling non-adaptive.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg, optimize

from noisybq.kernel import KernelSpec, as_points, kernel_cross_matrix, kernel_matrix

log = logging.getLogger(__name__)

JITTER_STEP = 1e-8
JITTER_RETRIES = 3


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def _cholesky_with_jitter(K: np.ndarray, lam: float, scale: float) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    jitter = 0.0
    for attempt in range(JITTER_RETRIES + 1):
        try:
            L = linalg.cholesky(K + (lam + jitter) * np.eye(n), lower=True)
            return L, jitter
        except linalg.LinAlgError:
            if attempt == JITTER_RETRIES:
                raise
            jitter += JITTER_STEP * scale
            log.debug("Cholesky failed; retrying with jitter %.3g", jitter)
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class GpState:
    spec: KernelSpec
    lam: float
    xs: np.ndarray
    ys: np.ndarray | None
    chol: np.ndarray
    jitter: float = field(default=0.0)

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be finite and > 0, got {self.lam!r}")

    @classmethod
    def empty(cls, spec: KernelSpec, lam: float, dim: int) -> GpState:
        return cls(spec, lam, _frozen(np.zeros((0, dim))), _frozen(np.zeros(0)), _frozen(np.zeros((0, 0))))

    @classmethod
    def from_data(cls, spec: KernelSpec, lam: float, xs, ys=None) -> GpState:
        xs = as_points(xs)
        if not np.all(np.isfinite(xs)):
            raise ValueError("non-finite observation points")
        if ys is not None:
            ys = np.asarray(ys, dtype=float).reshape(-1)
            if ys.shape[0] != xs.shape[0]:
                raise ValueError("xs and ys lengths differ")
            if not np.all(np.isfinite(ys)):
                raise ValueError("non-finite observations")
        if xs.shape[0] == 0:
            L, jitter = np.zeros((0, 0)), 0.0
        else:
            L, jitter = _cholesky_with_jitter(kernel_matrix(spec, xs), lam, spec.scale)
        return cls(spec, lam, _frozen(xs), None if ys is None else _frozen(ys), _frozen(L), jitter)

    @property
    def t(self) -> int:
        return self.xs.shape[0]

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    @property
    def effective_lam(self) -> float:
        return self.lam + self.jitter

    @cached_property
    def alpha(self) -> np.ndarray:
        """(K_t + lam I)^{-1} y_t."""
        if self.ys is None:
            raise ValueError("posterior mean needs observations (ys is absent)")
        if self.t == 0:
            return np.zeros(0)
        return linalg.cho_solve((self.chol, True), self.ys)

    def _query(self, x) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 0 or (arr.ndim == 1 and self.dim > 1)
        return as_points(arr, d=self.dim), single

    def _whitened(self, pts: np.ndarray) -> np.ndarray:
        """L^{-1} k_t(x) for each query column."""
        Kx = kernel_cross_matrix(self.spec, self.xs, pts)
        return linalg.solve_triangular(self.chol, Kx, lower=True, check_finite=False)

    def posterior_mean(self, x):
        pts, single = self._query(x)
        if self.t == 0:
            mean = np.zeros(pts.shape[0])
            if self.ys is None:
                raise ValueError("posterior mean needs observations (ys is absent)")
        else:
            mean = kernel_cross_matrix(self.spec, pts, self.xs) @ self.alpha
        return float(mean[0]) if single else mean

    def posterior_var(self, x, raw: bool = False):
        """Posterior variance, clamped at 0 unless ``raw``."""
        pts, single = self._query(x)
        var = np.full(pts.shape[0], self.spec.scale)
        if self.t:
            V = self._whitened(pts)
            var = var - np.einsum("ij,ij->j", V, V)
        if not raw:
            var = np.maximum(var, 0.0)
        return float(var[0]) if single else var

    def posterior_std(self, x):
        var = self.posterior_var(x)
        return math.sqrt(var) if isinstance(var, float) else np.sqrt(var)

    def extend(self, x, y: float | None = None) -> GpState:
        """New state with one more observation (rank-1 Cholesky append)."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if x.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: expected d={self.dim}, got {x.shape[1]}")
        if not np.all(np.isfinite(x)) or (y is not None and not math.isfinite(y)):
            raise ValueError("non-finite inputs")
        if self.ys is None and y is not None and self.t > 0:
            raise ValueError("cannot add an observation to a variance-only state")
        if self.ys is not None and y is None and self.t > 0:
            raise ValueError("state carries observations; y is required")
        xs = np.vstack([self.xs, x])
        ys = None if y is None else np.append(self.ys if self.ys is not None else np.zeros(0), y)
        if self.t == 0:
            return GpState.from_data(self.spec, self.lam, xs, ys)
        kx = kernel_cross_matrix(self.spec, self.xs, x)[:, 0]
        l = linalg.solve_triangular(self.chol, kx, lower=True, check_finite=False)
        d2 = self.spec.scale + self.effective_lam - l @ l
        if not d2 > 0:
            return GpState.from_data(self.spec, self.lam, xs, ys)
        t = self.t
        L = np.zeros((t + 1, t + 1))
        L[:t, :t] = self.chol
        L[t, :t] = l
        L[t, t] = math.sqrt(d2)
        return GpState(self.spec, self.lam, _frozen(xs), None if ys is None else _frozen(ys), _frozen(L), self.jitter)

    def confidence_bounds(self, band: ConfidenceBand, x):
        mean = self.posterior_mean(x)
        width = (band.B + band.beta(self.lam)) * self.posterior_std(x)
        return mean - width, mean + width


@dataclass(frozen=True)
class ConfidenceBand:
    """Pointwise band mu +- (B + beta) sigma for functions of RKHS norm <= B.

    ``R`` is the sub-Gaussian noise parameter; beta(lam) = (R / lam) sqrt(2 log(1/delta)).
    """

    B: float
    R: float
    delta: float

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.B < 0 or self.R < 0:
            raise ValueError("B and R must be nonnegative")

    def beta(self, lam: float) -> float:
        return (self.R / lam) * math.sqrt(2.0 * math.log(1.0 / self.delta))


def posterior_mean(state: GpState, x):
    return state.posterior_mean(x)


def posterior_var(state: GpState, x):
    return state.posterior_var(x)


def extend(state: GpState, x, y: float | None = None) -> GpState:
    return state.extend(x, y)


def confidence_bounds(state: GpState, band: ConfidenceBand, x):
    return state.confidence_bounds(band, x)


def log_marginal_likelihood(spec: KernelSpec, lam: float, xs, ys) -> float:
    """log N(ys | 0, K + lam I); raises LinAlgError if K + lam I is not positive definite."""
    xs = as_points(xs)
    ys = np.asarray(ys, dtype=float).reshape(-1)
    t = xs.shape[0]
    if t == 0:
        raise ValueError("need at least one observation")
    L = linalg.cholesky(kernel_matrix(spec, xs) + lam * np.eye(t), lower=True)
    a = linalg.solve_triangular(L, ys, lower=True)
    return float(-0.5 * a @ a - np.log(np.diag(L)).sum() - 0.5 * t * math.log(2 * math.pi))


DEFAULT_BOUNDS = ((0.01, 1.0), (1e-3, 1e3))


def fit_hyperparams(
    xs,
    ys,
    nu_fixed: float = 1.5,
    lam: float = 1e-6,
    bounds=DEFAULT_BOUNDS,
    grid: int = 16,
) -> KernelSpec:
    """Maximize the log marginal likelihood over (lengthscale, scale), nu held fixed.

    A ``grid x grid`` log-spaced search seeds a Nelder-Mead refinement in log
    coordinates; the refinement is kept only if it improves on the grid.
    """
    xs = as_points(xs)
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if xs.shape[0] < 3:
        raise ValueError("hyperparameter fitting needs at least 3 observations")
    (l_lo, l_hi), (s_lo, s_hi) = bounds
    lo = np.log([l_lo, s_lo])
    hi = np.log([l_hi, s_hi])

    def objective(theta):
        theta = np.clip(theta, lo, hi)
        try:
            return -log_marginal_likelihood(KernelSpec(nu_fixed, math.exp(theta[0]), math.exp(theta[1])), lam, xs, ys)
        except (linalg.LinAlgError, ValueError):
            return math.inf

    ls = np.unique(np.exp(np.linspace(lo[0], hi[0], grid)))
    ss = np.unique(np.exp(np.linspace(lo[1], hi[1], grid)))
    best, best_val = None, math.inf
    for l in ls:
        for s in ss:
            val = objective(np.log([l, s]))
            if val < best_val:
                best, best_val = np.log([l, s]), val
    if best is None:
        raise RuntimeError("hyperparameter fit failed: no candidate had a finite likelihood")

    if np.any(hi > lo):
        res = optimize.minimize(objective, best, method="Nelder-Mead", options={"xatol": 1e-4, "fatol": 1e-8})
        if res.fun < best_val:
            best = np.clip(res.x, lo, hi)
    return KernelSpec(nu_fixed, float(math.exp(best[0])), float(math.exp(best[1])))
