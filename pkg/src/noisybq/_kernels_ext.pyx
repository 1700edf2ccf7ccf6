# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Matern kernel core.

Same functions and semantics as ``_kernels_py``; selected at import by
``noisybq._backend`` when the extension is built.
"""

import numpy as np

from libc.math cimport exp, sqrt, log, sin, sinh, cosh, fabs, lgamma, isfinite, M_PI

BACKEND = "cython"

cdef double _EPS = 1e-16
cdef int _MAXIT = 10000
cdef double _XMIN = 2.0
cdef double _U_TINY = 1e-12

cdef double[26] _RGAMMA
_RGAMMA[:] = [
    1.0, 0.5772156649015329, -0.6558780715202538, -0.0420026350340952,
    0.1665386113822915, -0.0421977345555443, -0.0096219715278770,
    0.0072189432466630, -0.0011651675918591, -0.0002152416741149,
    0.0001280502823882, -0.0000201348547807, -0.0000012504934821,
    0.0000011330272320, -0.0000002056338417, 0.0000000061160950,
    0.0000000050020075, -0.0000000011812746, 0.0000000001043427,
    0.0000000000077823, -0.0000000000036968, 0.0000000000005100,
    -0.0000000000000206, -0.0000000000000054, 0.0000000000000014,
    0.0000000000000001,
]


cdef void _gammas(double mu, double* gam1, double* gam2, double* gampl, double* gammi) noexcept nogil:
    cdef double mu2 = mu * mu
    cdef double p = 1.0
    cdef double g1 = 0.0
    cdef double g2 = 0.0
    cdef int j = 0
    while j < 26:
        g2 += _RGAMMA[j] * p
        if j + 1 < 26:
            g1 -= _RGAMMA[j + 1] * p
        p *= mu2
        j += 2
    gam1[0] = g1
    gam2[0] = g2
    gampl[0] = g2 - mu * g1
    gammi[0] = g2 + mu * g1


cdef double _kv(double nu, double x) noexcept nogil:
    cdef int nl, i
    cdef double xmu, xmu2, xi, xi2, rkmu, rk1, rktemp
    cdef double x2, pimu, fact, d, e, fact2, gam1, gam2, gampl, gammi
    cdef double ff, total, total1, p, q, c, dd, delta
    cdef double b, h, delh, q1, q2, a1, a, qnew, s, dels
    if nu < 0.0:
        nu = -nu
    nl = <int>(nu + 0.5)
    xmu = nu - nl
    xmu2 = xmu * xmu
    xi = 1.0 / x
    xi2 = 2.0 * xi
    if x < _XMIN:
        x2 = 0.5 * x
        pimu = M_PI * xmu
        fact = 1.0 if fabs(pimu) < _EPS else pimu / sin(pimu)
        d = -log(x2)
        e = xmu * d
        fact2 = 1.0 if fabs(e) < _EPS else sinh(e) / e
        _gammas(xmu, &gam1, &gam2, &gampl, &gammi)
        ff = fact * (gam1 * cosh(e) + gam2 * fact2 * d)
        total = ff
        e = exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        dd = x2 * x2
        total1 = p
        for i in range(1, _MAXIT + 1):
            ff = (i * ff + p + q) / (i * i - xmu2)
            c *= dd / i
            p /= (i - xmu)
            q /= (i + xmu)
            delta = c * ff
            total += delta
            total1 += c * (p - i * ff)
            if fabs(delta) < fabs(total) * _EPS:
                break
        rkmu = total
        rk1 = total1 * xi2
    else:
        b = 2.0 * (1.0 + x)
        d = 1.0 / b
        h = d
        delh = d
        q1 = 0.0
        q2 = 1.0
        a1 = 0.25 - xmu2
        q = a1
        c = a1
        a = -a1
        s = 1.0 + q * delh
        for i in range(2, _MAXIT + 1):
            a -= 2 * (i - 1)
            c = -a * c / i
            qnew = (q1 - b * q2) / a
            q1 = q2
            q2 = qnew
            q += c * qnew
            b += 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h += delh
            dels = q * delh
            s += dels
            if fabs(dels / s) < _EPS:
                break
        h = a1 * h
        rkmu = sqrt(M_PI / (2.0 * x)) * exp(-x) / s
        rk1 = rkmu * (xmu + x + 0.5 - h) * xi
    for i in range(1, nl + 1):
        rktemp = (xmu + i) * xi2 * rk1 + rkmu
        rkmu = rk1
        rk1 = rktemp
    return rkmu


cdef struct _Corr:
    double nu
    double log_pref      # (1 - nu) log 2 - lgamma(nu)
    int n_coef           # > 0 selects the half-integer closed form
    double coef[16]


cdef inline double _corr(const _Corr* k, double u) noexcept nogil:
    cdef double acc, val
    cdef int j
    if k.n_coef > 0:
        acc = k.coef[k.n_coef - 1]
        j = k.n_coef - 2
        while j >= 0:
            acc = acc * u + k.coef[j]
            j -= 1
        return acc * exp(-u)
    if u <= _U_TINY:
        return 1.0
    if u >= 700.0:
        return 0.0
    val = exp(k.log_pref + k.nu * log(u)) * _kv(k.nu, u)
    if not isfinite(val):
        return 0.0
    return val


cdef _Corr _make_corr(double nu, bint bessel) except *:
    from noisybq._kernels_py import half_integer_coefficients
    cdef _Corr k
    cdef int j
    k.nu = nu
    k.log_pref = (1.0 - nu) * log(2.0) - lgamma(nu)
    k.n_coef = 0
    if not bessel:
        coef = half_integer_coefficients(nu)
        if coef is not None and len(coef) <= 16:
            k.n_coef = len(coef)
            for j in range(k.n_coef):
                k.coef[j] = coef[j]
    return k


def bessel_kv(double nu, x):
    """Modified Bessel function of the second kind K_nu(x), x > 0."""
    arr = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1))
    if flat.size and flat.min() <= 0.0:
        raise ValueError("bessel_kv requires x > 0")
    out = np.empty_like(flat)
    cdef const double[::1] xv = flat
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = _kv(nu, xv[i])
    return out.reshape(arr.shape)


def matern_corr(double nu, u, bint bessel=False):
    """Matern-nu correlation at scaled distance u = sqrt(2 nu) r / l."""
    arr = np.asarray(u, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1))
    out = np.empty_like(flat)
    cdef _Corr k = _make_corr(nu, bessel)
    cdef const double[::1] uv = flat
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = uv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = _corr(&k, uv[i])
    return out.reshape(arr.shape)


def matern_cross(double nu, double lengthscale, double scale, a, b, bint bessel=False):
    """Kernel matrix K[i, j] = scale * corr(|a_i - b_j|) for point arrays (n, d) and (m, d)."""
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], dim = av.shape[1]
    out = np.empty((n, m))
    if n == 0 or m == 0:
        return out
    cdef double[:, ::1] ov = out
    cdef _Corr k = _make_corr(nu, bessel)
    cdef double inv = sqrt(2.0 * nu) / lengthscale
    cdef Py_ssize_t i, j, t
    cdef double r2, diff
    with nogil:
        for i in range(n):
            for j in range(m):
                r2 = 0.0
                for t in range(dim):
                    diff = av[i, t] - bv[j, t]
                    r2 += diff * diff
                ov[i, j] = scale * _corr(&k, sqrt(r2) * inv)
    return out


def matern_expansion(double nu, double lengthscale, double scale, centers, weights, x, bint bessel=False):
    """Evaluate sum_j weights[j] * k(centers[j], x_i) for every row of x."""
    cdef const double[:, ::1] cv = np.ascontiguousarray(centers, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = cv.shape[0], dim = xv.shape[1]
    out = np.zeros(n)
    if n == 0 or m == 0:
        return out
    cdef double[::1] ov = out
    cdef _Corr k = _make_corr(nu, bessel)
    cdef double inv = sqrt(2.0 * nu) / lengthscale
    cdef Py_ssize_t i, j, t
    cdef double r2, diff, acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(m):
                r2 = 0.0
                for t in range(dim):
                    diff = xv[i, t] - cv[j, t]
                    r2 += diff * diff
                acc += wv[j] * _corr(&k, sqrt(r2) * inv)
            ov[i] = scale * acc
    return out
