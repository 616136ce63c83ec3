import math

import numpy as np
import pytest

from deformed_transport.deformed_group import connection_coefficients, constant_element, deformation_for, element_from_function
from deformed_transport.dt_group import (
    DTElement,
    _constant_matrix,
    cartan_residual,
    closure_curvature_residual,
    closure_deviation,
    commutator_check,
    dt_action_frame,
    dt_action_vector,
    dt_inverse,
    dt_multiply,
    dt_structure,
    dt_subgroup_closure_check,
    frame_commutator_coefficients,
    identity_element,
    mobile_frame,
    mobile_frame_derivative,
    pure_gauge,
    pure_translation,
    random_probes,
)
from deformed_transport.fields import ChartField, FDPolicy
from deformed_transport.levi_civita import anholonomity
from deformed_transport.manifolds import catalog_manifold
from deformed_transport.verify import frame_riemann

from conftest import CATALOG, log_slope

X0 = np.array([1.0, 2.0])


def _t(chart, c, eps=1.0):
    return element_from_function(
        lambda Y: eps * np.stack([c[0] + c[1] * np.sin(Y[..., 1]), c[2] + c[3] * Y[..., 0]], -1), 2, chart
    )


def _L(chart, c, eps=1.0):
    def f(Y):
        off = np.stack(
            [np.stack([c[0] * np.sin(Y[..., 0]), c[1] * Y[..., 1]], -1), np.stack([c[2] * Y[..., 0], c[3] * np.cos(Y[..., 1])], -1)],
            -2,
        )
        return np.eye(2) + eps * off

    return ChartField(f, (2, 2), chart)


@pytest.fixture(scope="module")
def element(sphere):
    return DTElement(_t(sphere.chart, [0.1, 0.05, -0.08, 0.03]), _L(sphere.chart, [0.1, 0.02, 0.05, -0.1]))


def test_identity_is_exact(sphere_def, sphere, element):
    e = identity_element(2, sphere.chart)
    for val in (dt_multiply(sphere_def, element, e, X0), dt_multiply(sphere_def, e, element, X0)):
        np.testing.assert_array_equal(val.t, element.t(X0))
        np.testing.assert_allclose(val.L, element.L(X0), atol=1e-15)


def test_inverse_composes_to_identity(sphere_def, sphere, element):
    for x in sphere.sample(5, seed=3) * 0.5 + np.array([0.8, 1.6]):
        inv = dt_inverse(sphere_def, element, x)
        g_inv = DTElement(constant_element(inv.t, sphere.chart), _constant_matrix(inv.L, sphere.chart))
        val = dt_multiply(sphere_def, g_inv, element, x)
        assert np.max(np.abs(val.t)) < 1e-8
        assert np.max(np.abs(val.L - np.eye(2))) < 1e-8


def test_flat_law_reduces_to_semidirect(flat2, flat2_def):
    x = np.array([0.1, -0.2])
    g = DTElement(_t(flat2.chart, [0.1, 0.05, -0.08, 0.03]), _L(flat2.chart, [0.1, 0.02, 0.05, -0.1]))
    gp = DTElement(_t(flat2.chart, [-0.05, 0.02, 0.04, 0.1]), _L(flat2.chart, [-0.2, 0.1, 0.0, 0.3]))
    val = dt_multiply(flat2_def, g, gp, x)
    xp = x + g.t(x)
    np.testing.assert_allclose(val.t, g.t(x) + gp.t(xp), atol=1e-15)
    np.testing.assert_allclose(val.L, g.L(x) @ gp.L(xp), atol=1e-15)


def test_gauge_subgroup(sphere, sphere_def):
    a, b = _L(sphere.chart, [0.1, 0.02, 0.05, -0.1]), _L(sphere.chart, [-0.2, 0.1, 0.0, 0.3])
    val = dt_multiply(sphere_def, pure_gauge(a), pure_gauge(b), X0)
    np.testing.assert_array_equal(val.moved, X0)
    np.testing.assert_array_equal(val.t, np.zeros(2))
    np.testing.assert_allclose(val.L, a(X0) @ b(X0), atol=1e-15)


def test_associativity_is_fourth_order(sphere, sphere_def):
    rng = np.random.default_rng(0)
    tc = [rng.normal(size=4) for _ in range(3)]
    lc = [rng.normal(size=4) for _ in range(3)]
    chart = sphere.chart
    eps_list = [0.1, 0.05, 0.025]
    res = []
    for eps in eps_list:
        g = [DTElement(_t(chart, tc[k], eps), _L(chart, lc[k], eps)) for k in range(3)]

        def product(a, b):
            return DTElement(
                element_from_function(lambda Y: dt_multiply(sphere_def, a, b, Y).t, 2, chart),
                ChartField(lambda Y: dt_multiply(sphere_def, a, b, Y).L, (2, 2), chart),
            )

        left = dt_multiply(sphere_def, product(g[0], g[1]), g[2], X0)
        right = dt_multiply(sphere_def, g[0], product(g[1], g[2]), X0)
        res.append(max(np.max(np.abs(left.t - right.t)), np.max(np.abs(left.L - right.L))))
    assert log_slope(eps_list, res) >= 3.8


def test_vector_action(sphere, sphere_def, flat2, flat2_def):
    tau = ChartField(lambda Y: np.stack([np.cos(Y[..., 0]), Y[..., 1]], -1), (2,), sphere.chart)
    np.testing.assert_array_equal(dt_action_vector(sphere_def, identity_element(2, sphere.chart), tau, X0), tau(X0))
    L = _L(sphere.chart, [0.1, 0.02, 0.05, -0.1])
    np.testing.assert_allclose(dt_action_vector(sphere_def, pure_gauge(L), tau, X0), L(X0) @ tau(X0), atol=1e-15)
    x = np.array([0.1, 0.2])
    t = constant_element([0.2, -0.1], flat2.chart)
    np.testing.assert_allclose(dt_action_vector(flat2_def, pure_translation(t), tau, x), tau(x + np.array([0.2, -0.1])), atol=1e-15)


def test_frame_action_trivial_cases(sphere, sphere_def):
    frame = sphere_def.frame_inverse(X0)
    np.testing.assert_allclose(dt_action_frame(sphere_def, identity_element(2, sphere.chart), X0), frame, atol=1e-15)
    M = np.array([[1.0, 0.3], [-0.2, 0.9]])
    g = pure_gauge(_constant_matrix(M, sphere.chart))
    np.testing.assert_allclose(dt_action_frame(sphere_def, g, X0), frame @ np.linalg.inv(M), atol=1e-14)


def test_frame_action_matches_mobile_frame(sphere, sphere_def):
    L = _L(sphere.chart, [0.1, 0.02, 0.05, -0.1])
    for t in (np.array([1e-4, 0.0]), np.array([0.0, 1e-4]), np.array([6e-5, -8e-5])):
        g = DTElement(constant_element(t, sphere.chart), L)
        assert np.max(np.abs(dt_action_frame(sphere_def, g, X0) - mobile_frame(sphere_def, t, L, X0))) < 1e-7


def test_moved_frame_derivative_limit(sphere_def):
    for s in range(2):
        quotients, extrapolated, expected = mobile_frame_derivative(sphere_def, X0, s)
        e1, e2 = (np.max(np.abs(q - expected)) for q in quotients)
        assert e1 / e2 == pytest.approx(2.0, rel=0.1)
        assert np.max(np.abs(extrapolated - expected)) < 1e-5


@pytest.mark.parametrize("name", CATALOG)
def test_structure_functions(name):
    m = catalog_manifold(name)
    d = deformation_for(m)
    X = m.sample(30, seed=4)
    S = dt_structure(d, X)
    np.testing.assert_array_equal(S.F, -np.swapaxes(S.F, -1, -2))
    np.testing.assert_array_equal(S.F_linear, -np.swapaxes(S.F_linear, -1, -2))
    assert np.max(np.abs(S.F_linear - frame_riemann(d, X))) < 1e-5
    # the frame-converted coordinate structure functions agree without a factor
    hinv = d.frame_inverse(X)
    F_coord = np.einsum("...nuv,...uk,...vl->...nkl", anholonomity(d.frame, X), hinv, hinv)
    assert np.max(np.abs(S.F - F_coord)) < 1e-8


@pytest.mark.parametrize("n", [2, 3])
def test_flat_tensors_vanish(n):
    m = catalog_manifold(f"euclidean-{n}")
    d = deformation_for(m)
    X = m.sample(10)
    S = dt_structure(d, X)
    assert np.max(np.abs(S.F)) < 1e-8 and np.max(np.abs(S.F_linear)) < 1e-8
    probes = random_probes(n, 3, seed=0, chart=m.chart)
    assert commutator_check(d, X, probes) < 1e-8
    r1, r2 = cartan_residual(d, X)
    assert r1 < 1e-9 and r2 < 1e-9


def test_commutator_identity_on_sphere(sphere, sphere_def):
    X = sphere.sample(50, seed=0)
    probes = random_probes(2, 10, seed=1, center=sphere.chart.domain.mean(axis=1), chart=sphere.chart)
    assert commutator_check(sphere_def, X, probes) < 1e-4
    assert commutator_check(sphere_def, X, probes, k=0, l=1) < 1e-4


def test_commutator_fd_order(sphere):
    c = sphere.chart.domain.mean(axis=1)
    X = c + 0.9 * (sphere.sample(20, seed=0) - c)
    hs = [4e-3, 2e-3, 1e-3]
    res = []
    for h in hs:
        m = sphere.with_fd(FDPolicy(h, h, False))
        probes = random_probes(2, 5, seed=1, center=c, chart=m.chart)
        res.append(commutator_check(deformation_for(m), X, probes))
    assert log_slope(hs, res) >= 1.8


def test_cartan_sphere_closed_form(sphere_def):
    th = math.pi / 3
    x = np.array([th, 1.0])
    r1, r2 = cartan_residual(sphere_def, x)
    assert r1 < 1e-5 and r2 < 1e-5
    gamma = connection_coefficients(sphere_def, x)
    omega = np.einsum("mkn,ku->mun", gamma, sphere_def.frame(x))
    # omega^0_1 = -cos(theta) dphi
    assert omega[0, 1, 1] == pytest.approx(-math.cos(th), abs=1e-8)
    assert abs(omega[0, 0, 1]) < 1e-8
    R2 = np.einsum("mnkl,ku,lv->mnuv", frame_riemann(sphere_def, x), sphere_def.frame(x), sphere_def.frame(x))
    assert R2[0, 1, 0, 1] == pytest.approx(math.sin(th), abs=1e-6)


def test_cartan_half_plane():
    m = catalog_manifold("hyperbolic2")
    r1, r2 = cartan_residual(deformation_for(m), m.sample(100))
    assert r1 < 1e-5 and r2 < 1e-5


def test_closure_flat_and_curved(sphere, sphere_def):
    for n in (2, 3):
        m = catalog_manifold(f"euclidean-{n}")
        res = dt_subgroup_closure_check(deformation_for(m), m.sample(10))
        assert res.closed and res.witness is None and res.max_deviation < 1e-12
    res = dt_subgroup_closure_check(sphere_def, sphere.sample(10))
    assert not res.closed
    assert res.witness is not None and sphere.chart.contains(res.witness)
    assert np.max(np.abs(closure_deviation(sphere_def, [0.2 / math.sqrt(2)] * 2, [0.0, 0.2], res.witness))) > 1e-6


def test_closure_deviation_is_second_order(sphere_def):
    a, b = np.array([0.3, 0.2]), np.array([-0.1, 0.25])
    eps_list = [0.1, 0.05, 0.025]
    dev = [np.max(np.abs(closure_deviation(sphere_def, e * a, e * b, X0))) for e in eps_list]
    assert log_slope(eps_list, dev) >= 1.8


def test_closure_defect_measures_curvature(sphere, sphere_def):
    a, b = np.array([0.6, 0.8]), np.array([-1.0, 0.0])
    assert closure_curvature_residual(sphere_def, a, b, X0) < 1e-5
    res = closure_curvature_residual(sphere_def, a, b, sphere.sample(20, seed=2))
    assert res.shape == (20,) and np.max(res) < 1e-5
