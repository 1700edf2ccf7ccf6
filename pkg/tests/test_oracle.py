import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisybq import oracle
from noisybq.integrands import make_bump_class, make_constant, make_weight, synthetic_from
from noisybq.kernel import KernelSpec


def box_fn(fn, d):
    fn.dim = d
    return fn


class TestRules:
    def test_kronrod_weights(self):
        assert oracle.KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
        assert oracle.GAUSS_WEIGHTS_ON_KRONROD.sum() == pytest.approx(2.0, abs=1e-15)
        np.testing.assert_allclose(oracle.KRONROD_NODES, -oracle.KRONROD_NODES[::-1], atol=0)

    @pytest.mark.parametrize("deg", range(0, 23))
    def test_kronrod_exact_on_polynomials(self, deg):
        got = oracle.KRONROD_WEIGHTS @ oracle.KRONROD_NODES**deg
        want = 0.0 if deg % 2 else 2.0 / (deg + 1)
        assert got == pytest.approx(want, abs=1e-14)

    @pytest.mark.parametrize("deg", range(0, 14))
    def test_gauss7_exact_on_polynomials(self, deg):
        got = oracle.GAUSS_WEIGHTS_ON_KRONROD @ oracle.KRONROD_NODES**deg
        want = 0.0 if deg % 2 else 2.0 / (deg + 1)
        assert got == pytest.approx(want, abs=1e-14)


class TestIntegrate:
    def test_linear_1d(self):
        res = oracle.integrate(box_fn(lambda x: x[:, 0], 1))
        assert res.method == "adaptive-1d" and res.converged
        assert res.value == pytest.approx(0.5, abs=1e-10)
        value, err = res
        assert err <= 1e-10

    def test_constant_2d(self):
        res = oracle.integrate(box_fn(lambda x: np.ones(x.shape[0]), 2))
        assert res.method == "tensor-gauss"
        assert res.value == pytest.approx(1.0, abs=1e-13)

    @pytest.mark.parametrize("d", [2, 3])
    def test_polynomial_exactness(self, d):
        # total degree below the 32-point rule's 63
        f = box_fn(lambda x: np.prod(x**7, axis=1) + x[:, 0] ** 20, d)
        want = (1 / 8) ** d + 1 / 21
        assert oracle.integrate(f).value == pytest.approx(want, abs=1e-12)

    def test_kink_with_breakpoint(self):
        f = box_fn(lambda x: np.abs(x[:, 0] - 0.3), 1)
        res = oracle.integrate(f, cfg=oracle.OracleConfig(breakpoints=(0.3,)))
        assert res.value == pytest.approx(0.29, abs=1e-12)

    def test_budget_exhaustion_is_flagged(self):
        f = box_fn(lambda x: np.sign(np.sin(200 * x[:, 0])), 1)
        res = oracle.integrate(f, cfg=oracle.OracleConfig(abs_tol=1e-14, points_budget=2000))
        assert not res.converged
        assert math.isfinite(res.value)

    def test_weighted_constant(self):
        w = make_weight("truncated-gaussian", {"mean": 0.2, "std": 0.3}, d=1)
        assert oracle.integrate(make_constant(1, 0.3), w).value == pytest.approx(0.3, abs=1e-9)

    def test_qmc_and_tensor_agree(self):
        f = box_fn(lambda x: np.exp(-((x[:, 0] - 0.4) ** 2) - 2 * x[:, 1]) * np.cos(3 * x[:, 1]), 2)
        tg = oracle.integrate(f)
        qm = oracle.integrate(f, cfg=oracle.OracleConfig(method="qmc"))
        assert abs(tg.value - qm.value) <= 5 * (tg.err_estimate + qm.err_estimate)
        assert qm.n_evals <= 10**6

    def test_qmc_high_dimension(self):
        f = box_fn(lambda x: np.sum(x, axis=1), 5)
        res = oracle.integrate(f)
        assert res.method == "qmc"
        assert res.value == pytest.approx(2.5, abs=1e-4)

    def test_bump_class_linearity(self):
        f, spec = make_bump_class(1, 1.5, 1.0, 12, np.random.default_rng(3))
        assert oracle.integrate(f).value == pytest.approx(spec.I0 * spec.signs.sum(), abs=1e-6)

    @pytest.mark.parametrize("bad", [{"method": "nquad"}, {"abs_tol": 0.0}])
    def test_invalid_config(self, bad):
        with pytest.raises(ValueError):
            oracle.OracleConfig(**bad)

    def test_method_dimension_limits(self):
        with pytest.raises(ValueError):
            oracle.OracleConfig(method="tensor-gauss").resolve(4)
        with pytest.raises(ValueError):
            oracle.OracleConfig(method="adaptive-1d").resolve(2)
        with pytest.raises(ValueError):
            oracle.OracleConfig(method="qmc", points_budget=100).resolve(2)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000), d=st.integers(1, 2))
def test_linearity(a, b, seed, d):
    rng = np.random.default_rng(seed)
    spec = KernelSpec(1.5, 0.3)
    f = synthetic_from(spec, rng.random((4, d)), rng.uniform(-1, 1, 4))
    g = box_fn(lambda x: np.cos(2 * x[:, 0]) + x[:, -1] ** 2, d)
    h = box_fn(lambda x: a * f(x) + b * g(x), d)
    lhs = oracle.integrate(h).value
    rhs = a * oracle.integrate(f).value + b * oracle.integrate(g).value
    assert lhs == pytest.approx(rhs, abs=1e-8)
