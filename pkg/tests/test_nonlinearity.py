import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shapecalc.nonlinearity import cubic, linear, pwl, relu, zero

ALL = [zero(), linear(2.0), relu(0.0), relu(0.3), cubic(),
       pwl([-1.0, 1.0], [0.0, 1.0, 2.0])]


def test_relu_directional_derivative_at_kink():
    b = relu(0.0)
    assert b.dir_deriv(0.0, -1.0) == 0.0
    assert b.dir_deriv(0.0, 1.0) == 1.0
    assert b.dir_deriv(1.0, -3.5) == -3.5  # smooth region: classical derivative


def test_cubic_directional_derivative():
    assert cubic().dir_deriv(2.0, 1.5) == pytest.approx(18.0)


def test_pwl_values_and_monotonicity():
    p = pwl([-1.0, 1.0], [0.0, 1.0, 2.0])
    ys = np.array([-2.0, -1.0, 0.0, 0.5, 1.0, 3.0])
    np.testing.assert_allclose(p(ys), [-1.0, -1.0, 0.0, 0.5, 1.0, 5.0])
    grid = np.linspace(-4, 4, 400)
    assert np.all(np.diff(p(grid)) >= 0)
    for b in ALL:
        assert np.all(np.diff(b(grid)) >= -1e-12)


def test_pwl_validation():
    with pytest.raises(ValueError):
        pwl([0.0], [1.0])  # wrong slope count
    with pytest.raises(ValueError):
        pwl([0.0, 1.0], [1.0, -1.0, 2.0])  # negative slope
    with pytest.raises(ValueError):
        linear(-1.0)


@pytest.mark.parametrize("beta", ALL, ids=lambda b: b.kind + str(b.params))
def test_directional_derivative_consistency(beta):
    # 100 random (y, d): difference quotient at tau = 1e-8 within 1e-6
    rng = np.random.default_rng(3)
    for _ in range(100):
        y = rng.uniform(-2, 2)
        d = rng.uniform(-2, 2)
        tau = 1e-8
        fd = (beta(y + tau * d) - beta(y)) / tau
        assert abs(fd - beta.dir_deriv(y, d)) <= 1e-6 * max(1.0, abs(d) * 10)


def test_pwl_exact_below_breakpoint_distance():
    p = pwl([-1.0, 1.0], [0.0, 1.0, 2.0])
    rng = np.random.default_rng(5)
    for _ in range(100):
        y = rng.uniform(-2, 2)
        d = rng.uniform(-2, 2)
        dist = np.min(np.abs(np.array([-1.0, 1.0]) - y))
        if dist < 1e-6 or d == 0:
            continue
        tau = min(1e-8, 0.5 * dist / abs(d))
        fd = (p(y + tau * d) - p(y)) / tau
        # linear piece: only float cancellation remains (exact in real arithmetic)
        assert fd == pytest.approx(p.dir_deriv(y, d), abs=1e-6)


@settings(max_examples=80, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 7.0))
def test_positive_homogeneity(y, d, s):
    for beta in ALL:
        a = beta.dir_deriv(y, s * d)
        b = s * beta.dir_deriv(y, d)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_slope_selection_at_kinks():
    b = relu(0.0)
    assert b.slope(0.0) == 1.0
    assert b.slope(0.0, selection="left") == 0.0
    assert b.slope(0.0, d=1.0) == 1.0
    assert b.slope(0.0, d=-1.0) == 0.0
    p = pwl([0.0], [1.0, 3.0])
    assert p.slope(0.0) == 3.0
    assert p.slope(0.0, selection="left") == 1.0


def test_lipschitz_bounds():
    assert zero().lipschitz_bound(5.0) == 0.0
    assert linear(2.0).lipschitz_bound(5.0) == 2.0
    assert relu(0.0).lipschitz_bound(5.0) == 1.0
    assert cubic().lipschitz_bound(2.0) == 12.0
    assert pwl([0.0], [1.0, 3.0]).lipschitz_bound(1.0) == 3.0
