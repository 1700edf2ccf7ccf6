import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisybq.kernel import (
    KernelSpec, SmoothnessInfo, bessel_kv, kernel_cross, kernel_eval, kernel_matrix, matern_correlation,
)


def mp_matern(nu, u):
    """High-precision Matern correlation from mpmath's Bessel K."""
    u = mpmath.mpf(u)
    nu = mpmath.mpf(nu)
    return float(2 ** (1 - nu) / mpmath.gamma(nu) * u**nu * mpmath.besselk(nu, u))


class TestKernelSpec:
    @pytest.mark.parametrize("field", ["nu", "lengthscale", "scale"])
    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_invalid(self, field, bad):
        args = {"nu": 1.5, "lengthscale": 1.0, "scale": 1.0, field: bad}
        with pytest.raises(ValueError):
            KernelSpec(**args)

    def test_half_integer_flag(self):
        assert KernelSpec(0.5, 1).is_half_integer
        assert KernelSpec(2.5, 1).is_half_integer
        assert not KernelSpec(1.0, 1).is_half_integer
        assert not KernelSpec(1.3, 1).is_half_integer

    @pytest.mark.parametrize("nu,d,s,is_int", [(1.5, 1, 2.0, True), (1.5, 2, 2.5, False), (1.0, 2, 2.0, True),
                                               (0.5, 3, 2.0, True), (2.5, 1, 3.0, True), (1.2, 1, 1.7, False)])
    def test_smoothness(self, nu, d, s, is_int):
        info = SmoothnessInfo.of(nu, d)
        assert info.s == nu + d / 2 == s
        assert info.s_is_integer is is_int


class TestBessel:
    @pytest.mark.parametrize("nu", [0.0, 0.3, 0.5, 1.0, 1.5, 2.0, 2.7, 4.5])
    def test_against_mpmath(self, core, nu):
        xs = np.array([1e-3, 0.1, 0.9, 1.99, 2.0, 2.01, 5.0, 20.0, 80.0])
        got = core.bessel_kv(nu, xs)
        want = np.array([float(mpmath.besselk(nu, x)) for x in xs])
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            bessel_kv(1.0, [1.0, 0.0])


class TestKernelEval:
    def test_zero_distance(self):
        assert kernel_eval(KernelSpec(1.5, 1.0), [0.3], [0.3]) == 1.0

    def test_exponential(self):
        assert kernel_eval(KernelSpec(0.5, 1.0), [0.0], [1.0]) == pytest.approx(math.exp(-1), rel=1e-14)
        assert kernel_eval(KernelSpec(0.5, 1.0), [0.0], [1.0]) == pytest.approx(mp_matern(0.5, 1.0), rel=1e-13)

    def test_matern32_scaled(self):
        want = 2 * (1 + math.sqrt(3)) * math.exp(-math.sqrt(3))
        assert kernel_eval(KernelSpec(1.5, 1.0, 2.0), [0.0, 0.0], [0.6, 0.8]) == pytest.approx(want, rel=1e-14)
        assert want == pytest.approx(2 * mp_matern(1.5, math.sqrt(3)), rel=1e-13)

    def test_matern52_closed_form(self):
        u = math.sqrt(5) * 0.7 / 0.5
        want = (1 + u + u * u / 3) * math.exp(-u)
        assert kernel_eval(KernelSpec(2.5, 0.5), [0.1], [0.8]) == pytest.approx(want, rel=1e-14)

    @pytest.mark.parametrize("nu", [0.7, 1.0, 2.0, 3.3])
    def test_general_nu_against_mpmath(self, core, nu):
        for u in (1e-4, 0.05, 0.8, 1.9, 2.1, 6.0, 30.0):
            assert core.matern_corr(nu, np.array([u]))[0] == pytest.approx(mp_matern(nu, u), rel=1e-11)

    @pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
    def test_closed_matches_bessel(self, core, nu):
        rng = np.random.default_rng(int(2 * nu))
        u = math.sqrt(2 * nu) * rng.uniform(1e-9, 5.0, 100)
        np.testing.assert_allclose(core.matern_corr(nu, u, False), core.matern_corr(nu, u, True), rtol=1e-8)

    def test_closed_requires_half_integer(self):
        with pytest.raises(ValueError):
            matern_correlation(1.0, 0.3, "closed")

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernel_eval(KernelSpec(1.5, 1.0), [0.0, 0.0], [0.0])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            kernel_eval(KernelSpec(1.5, 1.0), [np.nan], [0.0])

    def test_backends_agree(self):
        from noisybq import _backend, _kernels_py

        rng = np.random.default_rng(3)
        a, b = rng.random((40, 3)), rng.random((30, 3))
        for nu in (0.5, 1.5, 1.0, 2.2):
            np.testing.assert_allclose(_backend.matern_cross(nu, 0.4, 1.3, a, b),
                                       _kernels_py.matern_cross(nu, 0.4, 1.3, a, b), rtol=1e-12, atol=1e-15)
            w = rng.normal(size=40)
            np.testing.assert_allclose(_backend.matern_expansion(nu, 0.4, 1.3, a, w, b),
                                       _kernels_py.matern_expansion(nu, 0.4, 1.3, a, w, b), rtol=1e-10, atol=1e-13)


class TestKernelMatrix:
    def test_empty(self):
        assert kernel_matrix(KernelSpec(1.5, 1.0), np.zeros((0, 2))).shape == (0, 0)

    def test_single_point(self):
        np.testing.assert_array_equal(kernel_matrix(KernelSpec(1.5, 1.0, 3.0), [[0.2, 0.4]]), [[3.0]])

    def test_duplicates_rank_one(self):
        K = kernel_matrix(KernelSpec(1.5, 1.0, 2.0), [[0.5], [0.5]])
        np.testing.assert_array_equal(K, [[2.0, 2.0], [2.0, 2.0]])
        assert np.linalg.matrix_rank(K) == 1

    def test_collinear_exponential(self):
        pts = np.array([0.0, 0.5, 1.0])
        K = kernel_matrix(KernelSpec(0.5, 1.0), pts)
        np.testing.assert_allclose(K, np.exp(-np.abs(pts[:, None] - pts[None, :])), rtol=1e-14)

    def test_cross(self):
        spec = KernelSpec(0.5, 1.0)
        assert kernel_cross(spec, np.zeros((0, 1)), [0.5]).shape == (0,)
        np.testing.assert_allclose(kernel_cross(spec, [0.0, 1.0], [0.5]), [math.exp(-0.5)] * 2, rtol=1e-14)
        assert kernel_cross(KernelSpec(1.5, 1, 4.0), [[0.1, 0.2]], [0.1, 0.2])[0] == 4.0

    def test_cross_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernel_cross(KernelSpec(1.5, 1.0), [[0.0, 0.0]], [0.0, 0.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(
    nu=st.sampled_from([0.5, 1.5, 2.5, 1.0, 0.8]),
    ls=st.floats(0.05, 3.0),
    scale=st.floats(0.1, 10.0),
    n=st.integers(1, 20),
    d=st.integers(1, 3),
    seed=st.integers(0, 10**6),
)
def test_kernel_matrix_psd_symmetric(nu, ls, scale, n, d, seed):
    spec = KernelSpec(nu, ls, scale)
    pts = np.random.default_rng(seed).random((n, d))
    K = kernel_matrix(spec, pts)
    np.testing.assert_array_equal(K, K.T)
    np.testing.assert_array_equal(np.diag(K), scale)
    assert np.linalg.eigvalsh(K).min() >= -1e-8 * scale


@settings(max_examples=40, deadline=None)
@given(nu=st.sampled_from([0.5, 1.5, 2.5, 1.0, 3.2]), r1=st.floats(0, 5), r2=st.floats(0, 5), ls=st.floats(0.05, 2))
def test_monotone_decay(nu, r1, r2, ls):
    lo, hi = sorted((r1, r2))
    spec = KernelSpec(nu, ls)
    assert kernel_eval(spec, [0.0], [lo]) >= kernel_eval(spec, [0.0], [hi]) - 1e-15


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), d=st.integers(1, 4))
def test_symmetric_and_isotropic(seed, d):
    rng = np.random.default_rng(seed)
    spec = KernelSpec(1.5, 0.7, 1.4)
    x, y = rng.random(d), rng.random(d)
    assert kernel_eval(spec, x, y) == kernel_eval(spec, y, x)
    # a rotation about x preserves the distance, hence the value
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    y2 = x + q @ (y - x)
    assert kernel_eval(spec, x, y2) == pytest.approx(kernel_eval(spec, x, y), rel=1e-12)
