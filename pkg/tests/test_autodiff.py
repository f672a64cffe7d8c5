import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beampinn.autodiff import (
    Jet,
    Var,
    backward,
    extract_derivative,
    jet_arith,
    jet_constant,
    jet_variable,
    loss_gradient,
    value_and_grad,
)
from beampinn.errors import ConfigurationError, TrainingError, UsageError

from .fd import central_derivative, rel_err


def derivs(j):
    return [float(extract_derivative(j, k)) for k in range(j.order + 1)]


class TestSeeds:
    @pytest.mark.parametrize(
        "value, order, expected",
        [(2.0, 4, [2, 1, 0, 0, 0]), (0.0, 2, [0, 1, 0]), (-1.5, 4, [-1.5, 1, 0, 0, 0])],
    )
    def test_variable(self, value, order, expected):
        assert [float(c) for c in jet_variable(value, order).coeffs] == expected

    @pytest.mark.parametrize("value, order, expected", [(3.0, 4, [3, 0, 0, 0, 0]), (0.0, 2, [0, 0, 0])])
    def test_constant(self, value, order, expected):
        assert [float(c) for c in jet_constant(value, order).coeffs] == expected

    def test_constant_plus_variable_has_unit_slope(self):
        j = jet_constant(4.0, 3) + jet_variable(0.5, 3)
        assert derivs(j)[:2] == [4.5, 1.0]

    @pytest.mark.parametrize("order", [0, 5, -1])
    def test_bad_order(self, order):
        with pytest.raises(ConfigurationError):
            jet_variable(1.0, order)
        with pytest.raises(ConfigurationError):
            jet_constant(1.0, order)


class TestArith:
    def test_fourth_power(self):
        x = jet_variable(2.0, 4)
        f = jet_arith("square", jet_arith("square", x))
        assert derivs(f)[1:] == [32, 48, 48, 24]

    def test_tanh_maclaurin(self):
        assert derivs(jet_arith("tanh", jet_variable(0.0, 4)))[1:] == pytest.approx([1, 0, -2, 0], abs=1e-15)

    def test_exp(self):
        assert derivs(jet_arith("exp", jet_variable(0.0, 2)))[1:] == [1, 1]

    def test_scale_and_sub(self):
        x = jet_variable(1.0, 2)
        f = jet_arith("sub", jet_arith("scale", x, 3.0), jet_arith("mul", x, x))
        assert derivs(f) == [2.0, 1.0, -2.0]

    def test_order_mismatch(self):
        with pytest.raises(UsageError):
            jet_arith("add", jet_variable(1.0, 2), jet_variable(1.0, 4))
        with pytest.raises(UsageError):
            jet_arith("mul", jet_variable(1.0, 2))

    def test_unknown_kind(self):
        with pytest.raises(UsageError):
            jet_arith("sin", jet_variable(1.0, 2))

    def test_extract_examples(self):
        assert extract_derivative(Jet([2, 1, 0, 0, 0]), 0) == 2
        assert extract_derivative(Jet([0, 0, 0.5]), 2) == 1.0
        with pytest.raises(UsageError):
            extract_derivative(Jet([0, 0, 0.5]), 3)


finite = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=5, max_size=5), st.lists(finite, min_size=5, max_size=5), st.integers(1, 4))
def test_mul_commutes(a, b, order):
    ja, jb = Jet(a[: order + 1]), Jet(b[: order + 1])
    assert jet_arith("mul", ja, jb).coeffs == pytest.approx(jet_arith("mul", jb, ja).coeffs, rel=1e-14, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=5, max_size=5), finite)
def test_polynomials_exact(coeffs, x0):
    # Horner evaluation through jet arithmetic vs analytic polynomial derivatives
    x = jet_variable(x0, 4)
    acc = jet_constant(coeffs[-1], 4)
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    poly = np.polynomial.Polynomial(coeffs)
    for k in range(5):
        expected = poly.deriv(k)(x0) if k else poly(x0)
        assert float(extract_derivative(acc, k)) == pytest.approx(expected, rel=1e-12, abs=1e-11)


def _composite(x):
    """A tanh/exp composition exercising every jet operation."""
    u = (x * 0.8 - 0.3).tanh()
    v = (u * x + 0.5).tanh() * 1.7 - u.square() * 0.4
    return (v * 0.6).exp() + v * u


def _composite_float(x):
    u = math.tanh(0.8 * x - 0.3)
    v = 1.7 * math.tanh(u * x + 0.5) - 0.4 * u * u
    return math.exp(0.6 * v) + v * u


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2, allow_nan=False))
def test_composition_matches_finite_differences(x0):
    j = _composite(jet_variable(x0, 4))
    for k in range(1, 5):
        fd = central_derivative(_composite_float, x0, k)
        tol = 1e-5 if k <= 2 else 1e-3
        assert rel_err(float(extract_derivative(j, k)), fd) < tol, k


class TestTape:
    def test_square(self):
        np.testing.assert_array_equal(loss_gradient(lambda v: v.square().sum(), [3.0]), [6.0])

    def test_independent_component_zero(self):
        g = loss_gradient(lambda v: (v[0] * 2.0).square().sum(), [1.0, 5.0])
        assert g[1] == 0.0 and g[0] == 8.0

    def test_broadcast_and_matmul(self):
        rng = np.random.default_rng(0)
        a0, w0 = rng.normal(size=(4, 3)), rng.normal(size=(1, 3))
        b0 = rng.normal(size=(3, 2))

        def f(a, w, b):
            return (((a * w + w) @ b).tanh()).square().sum()

        a, w, b = Var(a0), Var(w0), Var(b0)
        ga, gw, gb = backward(f(a, w, b), [a, w, b])
        for arr, g in ((a0, ga), (w0, gw), (b0, gb)):
            fd = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                hi, lo = arr.copy(), arr.copy()
                hi[idx] += 1e-6
                lo[idx] -= 1e-6
                args = [a0, w0, b0]
                pos = [i for i, v in enumerate(args) if v is arr][0]
                args_hi, args_lo = list(args), list(args)
                args_hi[pos], args_lo[pos] = hi, lo
                fd[idx] = (f(*[Var(v) for v in args_hi]).value - f(*[Var(v) for v in args_lo]).value) / 2e-6
            np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8)

    def test_non_finite_loss(self):
        with pytest.raises(TrainingError):
            value_and_grad(lambda v: (v * np.inf).sum(), [1.0])

    def test_deterministic(self):
        f = lambda v: (v.tanh() * v).square().sum()  # noqa: E731
        theta = np.linspace(-1, 1, 7)
        assert np.array_equal(loss_gradient(f, theta), loss_gradient(f, theta))

    def test_jet_with_tape_coefficients(self):
        # d/dw of the 4th x-derivative of tanh(w x) at x = 0.3
        def fourth(w):
            return (jet_variable(0.3, 4) * w).tanh().derivative(4)

        w = Var(np.array(1.3))
        (g,) = backward(fourth(w), [w])
        fd = (float(fourth(1.3 + 1e-6)) - float(fourth(1.3 - 1e-6))) / 2e-6
        assert rel_err(float(g), fd) < 1e-6
