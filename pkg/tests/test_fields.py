import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deformed_transport.fields import (
    FD_ENV_VAR,
    Chart,
    ChartField,
    FDPolicy,
    NonFiniteEvaluation,
    StencilOutOfDomain,
    default_policy,
    differentiate,
    gradient,
    sample_points,
)

from conftest import log_slope

CHART = Chart(np.array([[-2.0, 2.0], [-2.0, 2.0]]))


def _field(chart=CHART):
    def f(X):
        x, y = X[..., 0], X[..., 1]
        return np.stack([np.sin(x) * y, np.exp(0.3 * x * y)], axis=-1)

    return ChartField(f, (2,), chart)


def _exact_grad(X):
    x, y = X[..., 0], X[..., 1]
    e = np.exp(0.3 * x * y)
    # [..., mu, component]
    return np.stack([np.stack([np.cos(x) * y, 0.3 * y * e], -1), np.stack([np.sin(x), 0.3 * x * e], -1)], -2)


def test_central_difference_is_second_order():
    X = np.array([[0.4, 0.7], [-1.1, 0.2]])
    hs = [4e-2, 2e-2, 1e-2, 5e-3]
    errs = [np.max(np.abs(gradient(_field(), X, FDPolicy(h, h, False)) - _exact_grad(X))) for h in hs]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert min(ratios) >= 3.5
    assert log_slope(hs, errs) == pytest.approx(2.0, abs=0.1)


def test_richardson_beats_plain():
    X = np.array([[0.4, 0.7]])
    plain = np.max(np.abs(gradient(_field(), X, FDPolicy(1e-3, 1e-3, False)) - _exact_grad(X)))
    rich = np.max(np.abs(gradient(_field(), X, FDPolicy(1e-3, 1e-3, True)) - _exact_grad(X)))
    assert rich < plain / 100


def test_default_gradient_accuracy():
    X = sample_points(CHART, 20, seed=3)
    assert np.max(np.abs(gradient(_field(), X) - _exact_grad(X))) < 1e-9


def test_analytic_gradient_takes_precedence():
    fld = ChartField(lambda X: X[..., 0] ** 2, (), CHART, grad=lambda X: np.stack([2 * X[..., 0], 0 * X[..., 1]], -1))
    X = np.array([0.5, 0.1])
    np.testing.assert_array_equal(gradient(fld, X), [1.0, 0.0])
    assert differentiate(fld, X, 0) == 1.0


def test_stencil_outside_domain_raises():
    with pytest.raises(StencilOutOfDomain):
        gradient(_field(), np.array([2.0, 0.0]))


def test_non_finite_values_raise():
    fld = ChartField(lambda X: 1.0 / (X[..., 0] - 0.5), (), CHART)
    with np.errstate(divide="ignore"):
        with pytest.raises(NonFiniteEvaluation):
            gradient(fld, np.array([0.5, 0.0]), FDPolicy(0.5, 0.5))


def test_gradient_is_pure():
    X = np.array([[0.4, 0.7], [0.1, -0.3]])
    X0 = X.copy()
    a = gradient(_field(), X)
    b = gradient(_field(), X)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(X, X0)


def test_env_override(monkeypatch):
    monkeypatch.setenv(FD_ENV_VAR, "2e-4")
    pol = default_policy()
    assert pol.h0 == 2e-4 and pol.nested_h0 == pytest.approx(2e-3) and pol.richardson
    monkeypatch.setenv(FD_ENV_VAR, "-1")
    with pytest.raises(ValueError):
        default_policy()


def test_chart_validation():
    with pytest.raises(ValueError):
        Chart(np.array([[0.0, 1.0]]), margins=np.array([0.6]))
    with pytest.raises(ValueError):
        FDPolicy(h0=0.0)


@given(st.integers(1, 50), st.integers(0, 2**31))
def test_sampling_deterministic_and_inside(count, seed):
    chart = Chart(np.array([[0.1, 3.0], [-1.0, 5.0], [2.0, 2.5]]))
    A = sample_points(chart, count, seed)
    B = sample_points(chart, count, seed)
    assert A.shape == (count, 3)
    np.testing.assert_array_equal(A, B)
    assert np.all(chart.contains(A, shrunk=True))


def test_sampling_seeds_differ():
    assert not np.array_equal(sample_points(CHART, 10, 0), sample_points(CHART, 10, 1))
