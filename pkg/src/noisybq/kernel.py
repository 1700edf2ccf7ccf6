"""Matern-nu kernel evaluation and Sobolev-smoothness bookkeeping.

Points are NumPy arrays: a single point has shape ``(d,)`` and a set of points
has shape ``(n, d)``.  A 1-D array passed where a point *set* is expected is
read as ``n`` points in one dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from noisybq import _backend


@dataclass(frozen=True)
class KernelSpec:
    """Matern kernel ``scale * corr_nu(sqrt(2 nu) r / lengthscale)``."""

    nu: float
    lengthscale: float
    scale: float = 1.0

    def __post_init__(self):
        for name in ("nu", "lengthscale", "scale"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"KernelSpec.{name} must be finite and > 0, got {value!r}")

    @property
    def is_half_integer(self) -> bool:
        two_nu = round(2 * self.nu)
        return abs(2 * self.nu - two_nu) < 1e-12 and two_nu % 2 == 1

    def smoothness(self, d: int) -> SmoothnessInfo:
        return SmoothnessInfo.of(self.nu, d)

    def replace(self, **changes) -> KernelSpec:
        fields = {"nu": self.nu, "lengthscale": self.lengthscale, "scale": self.scale}
        fields.update(changes)
        return KernelSpec(**fields)


@dataclass(frozen=True)
class SmoothnessInfo:
    d: int
    s: float
    s_is_integer: bool

    @classmethod
    def of(cls, nu: float, d: int) -> SmoothnessInfo:
        if d < 1:
            raise ValueError("dimension must be a positive integer")
        two_nu = 2 * nu
        is_int = abs(two_nu - round(two_nu)) < 1e-12 and (round(two_nu) + d) % 2 == 0
        return cls(d=d, s=nu + d / 2, s_is_integer=is_int)


def as_points(points, d: int | None = None) -> np.ndarray:
    """Coerce to a float array of shape (n, d)."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if (d is None or d == 1) else arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ValueError(f"expected points of shape (n, d), got {arr.shape}")
    if d is not None and arr.shape[0] and arr.shape[1] != d:
        raise ValueError(f"dimension mismatch: expected d={d}, got {arr.shape[1]}")
    return arr


def as_point(x, d: int | None = None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"expected a single point, got shape {arr.shape}")
    if d is not None and arr.shape[0] != d:
        raise ValueError(f"dimension mismatch: expected d={d}, got {arr.shape[0]}")
    return arr


def _check_finite(arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite coordinates")


def matern_correlation(nu: float, u, method: str = "auto") -> np.ndarray:
    """Correlation at scaled distance ``u``.

    ``method="bessel"`` forces the general K_nu path even for half-integer nu;
    ``"closed"`` requires a half-integer nu.
    """
    if method == "closed":
        if not KernelSpec(nu, 1.0).is_half_integer:
            raise ValueError(f"no closed form for nu={nu}")
        return _backend.matern_corr(nu, u, False)
    if method not in ("auto", "bessel"):
        raise ValueError(f"unknown method {method!r}")
    return _backend.matern_corr(nu, u, method == "bessel")


def bessel_kv(nu: float, x) -> np.ndarray:
    """Modified Bessel function of the second kind, series / continued-fraction evaluation."""
    return _backend.bessel_kv(nu, x)


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    x = as_point(x)
    x2 = as_point(x2, d=x.shape[0])
    _check_finite(x)
    _check_finite(x2)
    return float(_backend.matern_cross(spec.nu, spec.lengthscale, spec.scale, x[None, :], x2[None, :])[0, 0])


def kernel_cross_matrix(spec: KernelSpec, a, b) -> np.ndarray:
    """K[i, j] = k(a_i, b_j)."""
    a = as_points(a)
    b = as_points(b, d=a.shape[1] if a.shape[0] else None)
    if a.shape[0] and b.shape[0] and a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch")
    return _backend.matern_cross(spec.nu, spec.lengthscale, spec.scale, a, b)


def kernel_matrix(spec: KernelSpec, points) -> np.ndarray:
    points = as_points(points)
    if points.shape[0] == 0:
        return np.zeros((0, 0))
    _check_finite(points)
    K = _backend.matern_cross(spec.nu, spec.lengthscale, spec.scale, points, points)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, spec.scale)
    return K


def kernel_cross(spec: KernelSpec, points, x) -> np.ndarray:
    """Vector [k(points_i, x)]_i."""
    points = as_points(points)
    if points.shape[0] == 0:
        return np.zeros(0)
    x = as_point(x, d=points.shape[1])
    _check_finite(x)
    return _backend.matern_cross(spec.nu, spec.lengthscale, spec.scale, points, x[None, :])[:, 0]


def kernel_expansion(spec: KernelSpec, centers, weights, x) -> np.ndarray:
    """Evaluate sum_j weights_j k(centers_j, x_i) without forming the full matrix."""
    centers = as_points(centers)
    x = as_points(x, d=centers.shape[1] if centers.shape[0] else None)
    return _backend.matern_expansion(spec.nu, spec.lengthscale, spec.scale, centers, np.asarray(weights, float), x)
