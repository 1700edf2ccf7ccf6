"""NumPy implementation of the Matern kernel core.

Mirrors ``_kernels_ext.pyx`` function for function. It is the fallback when the
compiled extension is unavailable and the reference the extension is tested
against.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import cdist

BACKEND = "python"

_EPS = 1e-16
_MAXIT = 10000
_XMIN = 2.0
_U_TINY = 1e-12

# Taylor coefficients of 1/Gamma(1 + z) = sum_j RGAMMA[j] z**j.
RGAMMA = (
    1.0, 0.5772156649015329, -0.6558780715202538, -0.0420026350340952,
    0.1665386113822915, -0.0421977345555443, -0.0096219715278770,
    0.0072189432466630, -0.0011651675918591, -0.0002152416741149,
    0.0001280502823882, -0.0000201348547807, -0.0000012504934821,
    0.0000011330272320, -0.0000002056338417, 0.0000000061160950,
    0.0000000050020075, -0.0000000011812746, 0.0000000001043427,
    0.0000000000077823, -0.0000000000036968, 0.0000000000005100,
    -0.0000000000000206, -0.0000000000000054, 0.0000000000000014,
    0.0000000000000001,
)


def temme_gammas(mu: float) -> tuple[float, float, float, float]:
    """Return (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) for |mu| <= 1/2.

    gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) and
    gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2, summed from the even/odd parts
    of the series so that gam1 has no cancellation near mu = 0.
    """
    mu2 = mu * mu
    gam1 = 0.0
    gam2 = 0.0
    p = 1.0
    for j in range(0, len(RGAMMA), 2):
        gam2 += RGAMMA[j] * p
        if j + 1 < len(RGAMMA):
            gam1 -= RGAMMA[j + 1] * p
        p *= mu2
    return gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1


def half_integer_coefficients(nu: float) -> np.ndarray | None:
    """Polynomial coefficients c_j (ascending in u) with corr(u) = exp(-u) * sum c_j u**j.

    Returns None unless ``nu`` is a half-integer.
    """
    two_nu = round(2.0 * nu)
    if abs(2.0 * nu - two_nu) > 1e-12 or two_nu % 2 != 1:
        return None
    p = (two_nu - 1) // 2
    coef = np.zeros(p + 1)
    norm = math.factorial(p) / math.factorial(2 * p)
    for i in range(p + 1):
        j = p - i
        coef[j] = (
            norm * math.factorial(p + i) / (math.factorial(i) * math.factorial(p - i)) * 2.0**j
        )
    return coef


def bessel_kv(nu: float, x) -> np.ndarray:
    """Modified Bessel function of the second kind K_nu(x), x > 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    flat_x = x.reshape(-1)
    flat = out.reshape(-1)
    if np.any(flat_x <= 0.0):
        raise ValueError("bessel_kv requires x > 0")
    nu = abs(float(nu))
    nl = int(nu + 0.5)
    xmu = nu - nl
    xmu2 = xmu * xmu

    rkmu = np.empty_like(flat_x)
    rk1 = np.empty_like(flat_x)

    small = flat_x < _XMIN
    if np.any(small):
        xs = flat_x[small]
        x2 = 0.5 * xs
        pimu = math.pi * xmu
        fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
        d = -np.log(x2)
        e = xmu * d
        fact2 = np.ones_like(e)
        nz = np.abs(e) >= _EPS
        fact2[nz] = np.sinh(e[nz]) / e[nz]
        gam1, gam2, gampl, gammi = temme_gammas(xmu)
        ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
        total = ff.copy()
        e = np.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = np.ones_like(xs)
        dd = x2 * x2
        total1 = p.copy()
        for i in range(1, _MAXIT + 1):
            ff = (i * ff + p + q) / (i * i - xmu2)
            c = c * dd / i
            p = p / (i - xmu)
            q = q / (i + xmu)
            delta = c * ff
            total += delta
            total1 += c * (p - i * ff)
            if np.all(np.abs(delta) < np.abs(total) * _EPS):
                break
        rkmu[small] = total
        rk1[small] = total1 * 2.0 / xs

    large = ~small
    if np.any(large):
        xl = flat_x[large]
        b = 2.0 * (1.0 + xl)
        d = 1.0 / b
        h = d.copy()
        delh = d.copy()
        q1 = np.zeros_like(xl)
        q2 = np.ones_like(xl)
        a1 = 0.25 - xmu2
        q = np.full_like(xl, a1)
        c = a1
        a = -a1
        s = 1.0 + q * delh
        for i in range(2, _MAXIT + 1):
            a -= 2 * (i - 1)
            c = -a * c / i
            qnew = (q1 - b * q2) / a
            q1 = q2
            q2 = qnew
            q = q + c * qnew
            b = b + 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h = h + delh
            dels = q * delh
            s = s + dels
            if np.all(np.abs(dels / s) < _EPS):
                break
        h = a1 * h
        km = np.sqrt(math.pi / (2.0 * xl)) * np.exp(-xl) / s
        rkmu[large] = km
        rk1[large] = km * (xmu + xl + 0.5 - h) / xl

    xi2 = 2.0 / flat_x
    for i in range(1, nl + 1):
        tmp = (xmu + i) * xi2 * rk1 + rkmu
        rkmu = rk1
        rk1 = tmp
    flat[:] = rkmu
    return out


def matern_corr(nu: float, u, bessel: bool = False) -> np.ndarray:
    """Matern-nu correlation at scaled distance u = sqrt(2 nu) r / l."""
    u = np.asarray(u, dtype=float)
    coef = None if bessel else half_integer_coefficients(nu)
    if coef is not None:
        return np.polynomial.polynomial.polyval(u, coef) * np.exp(-u)
    out = np.ones_like(u)
    pos = u > _U_TINY
    if np.any(pos):
        up = u[pos]
        logpref = (1.0 - nu) * math.log(2.0) - math.lgamma(nu) + nu * np.log(up)
        kv = np.zeros_like(up)
        finite = up < 700.0
        if np.any(finite):
            kv[finite] = bessel_kv(nu, up[finite])
        with np.errstate(over="ignore", invalid="ignore"):
            val = np.exp(logpref) * kv
        out[pos] = np.where(np.isfinite(val), val, 0.0)
    return out


def matern_cross(nu: float, lengthscale: float, scale: float, a, b, bessel: bool = False) -> np.ndarray:
    """Kernel matrix K[i, j] = scale * corr(|a_i - b_j|) for point arrays (n, d) and (m, d)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    u = cdist(a, b) * (math.sqrt(2.0 * nu) / lengthscale)
    return scale * matern_corr(nu, u, bessel=bessel)


def matern_expansion(
    nu: float, lengthscale: float, scale: float, centers, weights, x, bessel: bool = False
) -> np.ndarray:
    """Evaluate sum_j weights[j] * k(centers[j], x_i) for every row of x."""
    centers = np.asarray(centers, dtype=float)
    weights = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    out = np.zeros(n)
    m = centers.shape[0]
    if m == 0 or n == 0:
        return out
    block = max(1, 2_000_000 // m)
    for start in range(0, n, block):
        stop = min(n, start + block)
        out[start:stop] = matern_cross(nu, lengthscale, scale, x[start:stop], centers, bessel) @ weights
    return out
