"""The group of parallel transports: pairs ``(t(x), L(x))``.

An element acts on a vector field by ``tau -> L(x) lambda(x, t(x)) tau(x')``.
Products compose the translation parts with the deformed-group law and
the linear parts as ``L lambda(x,t) L'(x') lambda(x',t') lambda(x,phi)^{-1}``.
The translation generators of this group are covariant derivatives in the
frame, and its structure functions contain the frame anholonomity and the
curvature; the checks below evaluate those identities numerically.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .deformed_group import (
    DeformationField,
    GroupElement,
    _moved_point,
    constant_element,
    extract_expansion,
    gamma_field,
    jet_apply,
    jet_invert,
    product_values,
    connection_coefficients,
)
from .fields import ChartField, DomainError, GeometryError, gradient
from .transport import lambda_matrix

__all__ = [
    "DTElement",
    "DTValue",
    "DTStructure",
    "ClosureResult",
    "identity_element",
    "pure_gauge",
    "pure_translation",
    "dt_multiply",
    "dt_inverse",
    "dt_action_vector",
    "dt_action_frame",
    "gauge_connection",
    "mobile_frame",
    "mobile_frame_derivative",
    "frame_commutator_coefficients",
    "dt_structure",
    "covariant_generator",
    "random_probes",
    "commutator_residuals",
    "commutator_check",
    "cartan_residual",
    "closure_deviation",
    "closure_curvature_residual",
    "dt_subgroup_closure_check",
]


@dataclass(frozen=True)
class DTElement:
    t: GroupElement
    L: ChartField  # (n, n)

    def linear(self, X) -> np.ndarray:
        L = self.L(X)
        if np.any(np.abs(np.linalg.det(L)) < 1e-300):
            raise GeometryError("gauge part is singular")
        return L


@dataclass(frozen=True)
class DTValue:
    """Components of a group element at one point, plus the moved point ``x'``."""

    t: np.ndarray
    L: np.ndarray
    moved: np.ndarray


@dataclass(frozen=True)
class DTStructure:
    F: np.ndarray  # [..., m, k, l]
    F_linear: np.ndarray  # [..., m, n, k, l]


def _constant_matrix(M, chart=None) -> ChartField:
    M = np.asarray(M, dtype=float)
    return ChartField(lambda X: np.broadcast_to(M, np.shape(X)[:-1] + M.shape), M.shape, chart)


def identity_element(n: int, chart=None) -> DTElement:
    return DTElement(constant_element(np.zeros(n), chart), _constant_matrix(np.eye(n), chart))


def pure_gauge(L: ChartField) -> DTElement:
    return DTElement(constant_element(np.zeros(L.shape[0]), L.chart), L)


def pure_translation(t: GroupElement) -> DTElement:
    n = t.field.shape[0]
    return DTElement(t, _constant_matrix(np.eye(n), t.field.chart))


def dt_multiply(deformation: DeformationField, g: DTElement, gp: DTElement, x) -> DTValue:
    x = np.asarray(x, dtype=float)
    t = g.t(x)
    phi, xp = product_values(deformation, x, t, gp.t)
    tp = gp.t(xp)
    lam1 = lambda_matrix(deformation, x, t).matrix
    lam2 = lambda_matrix(deformation, xp, tp).matrix
    lam3 = lambda_matrix(deformation, x, phi).matrix
    left = g.linear(x) @ lam1 @ gp.linear(xp) @ lam2
    lin = np.linalg.solve(np.swapaxes(lam3, -1, -2), np.swapaxes(left, -1, -2))
    return DTValue(phi, np.swapaxes(lin, -1, -2), xp)


def _preimage(deformation: DeformationField, t: GroupElement, x, tol=1e-10, max_iter=200) -> np.ndarray:
    """Point ``y`` with ``y + H_y^{-1}(t(y)) = x`` by fixed-point iteration.

    The jets carry finite-difference noise near 1e-11, which sets the floor on `tol`.
    """
    y = np.array(x, dtype=float)
    for _ in range(max_iter):
        disp = jet_invert(deformation.jet(y))(t(y))
        y_new = x - disp
        if np.max(np.abs(y_new - y)) <= tol * max(1.0, float(np.max(np.abs(x)))):
            return y_new
        y = y_new
    raise GeometryError("inverse translation did not converge; translation too large")


def dt_inverse(deformation: DeformationField, g: DTElement, x) -> DTValue:
    """Left inverse at ``x``: the value ``g^{-1}(x)`` with ``g^{-1} * g = e``.

    The translation part starts from the exact preimage of ``x`` under the
    action of ``t`` and is then polished so that the truncated product
    vanishes.  The linear part is solved from the product law directly.

    ``moved`` is ``x~ = f(x, t^{-1}(x))``, the point whose image under ``t`` is ``x``.
    """
    x = np.asarray(x, dtype=float)
    y = _preimage(deformation, g.t, x)
    guess = jet_apply(deformation.jet(x), y - x)
    def residual(a):
        return product_values(deformation, x, a, g.t)[0]

    sol = optimize.root(residual, guess, method="hybr", options={"xtol": 1e-13})
    # finite-difference noise in the jets can stall the solver short of its
    # own tolerance; keep its answer whenever it improves on the guess
    better = np.max(np.abs(residual(sol.x))) <= np.max(np.abs(residual(guess)))
    t_inv = sol.x if better else guess
    phi, xt = product_values(deformation, x, t_inv, g.t)
    lam_inv = lambda_matrix(deformation, x, t_inv).matrix
    lam_t = lambda_matrix(deformation, xt, g.t(xt)).matrix
    lam_phi = lambda_matrix(deformation, x, phi).matrix
    # L_inv lam_inv L(x~) lam_t lam_phi^{-1} = I
    right = lam_inv @ g.linear(xt) @ lam_t
    L_inv = lam_phi @ np.linalg.inv(right)
    return DTValue(t_inv, L_inv, xt)


def dt_action_vector(deformation: DeformationField, g: DTElement, tau: ChartField, x) -> np.ndarray:
    """``L(x) lambda(x, t(x)) tau(x')`` in frame components."""
    x = np.asarray(x, dtype=float)
    t = g.t(x)
    lam = lambda_matrix(deformation, x, t)
    return np.einsum("...mn,...n->...m", g.linear(x) @ lam.matrix, tau(lam.source))


def dt_action_frame(deformation: DeformationField, g: DTElement, x, frame=None) -> np.ndarray:
    """Transported frame ``h_par^mu_m = h^mu_k lambda^{-1}(x~, t(x~))^k_n L^{-1}(x~)^n_m``.

    Columns of the result are the moved frame vectors in coordinate components.
    """
    x = np.asarray(x, dtype=float)
    frame = deformation.frame if frame is None else frame
    inv = dt_inverse(deformation, g, x)
    xt = inv.moved
    lam = lambda_matrix(deformation, xt, g.t(xt)).matrix
    return frame.inverse(x) @ np.linalg.inv(g.linear(xt) @ lam)


def gauge_connection(deformation: DeformationField, L: ChartField, X) -> np.ndarray:
    """Connection coefficients in the gauge-rotated frame ``X_bar_m = (L^{-1})^n_m X_n``.

    ``gbar^a_{sm} = L^a_l (gamma^l_{rp} Li^r_s Li^p_m + Li^p_s h^sig_p d_sig Li^l_m)``
    with ``Li = L^{-1}``.
    """
    X = np.asarray(X, dtype=float)
    n = L.shape[0]
    Lx = L(X)
    Li = np.linalg.inv(Lx)
    dLi = gradient(ChartField(lambda Y: np.linalg.inv(L(Y)), (n, n), L.chart, nested=L.nested), X)  # [sig, l, m]
    gamma = connection_coefficients(deformation, X)
    hinv = deformation.frame_inverse(X)
    term1 = np.einsum("...lrp,...rs,...pm->...lsm", gamma, Li, Li)
    term2 = np.einsum("...ps,...up,...ulm->...lsm", Li, hinv, dLi)
    return np.einsum("...al,...lsm->...asm", Lx, term1 + term2)


def mobile_frame(deformation: DeformationField, t, L: ChartField, X) -> np.ndarray:
    """First-order moved frame ``X_bar_m - t_bar^s gbar^n_{sm} X_bar_n`` (columns, coordinate components)."""
    X = np.asarray(X, dtype=float)
    Lx = L(X)
    Li = np.linalg.inv(Lx)
    Xbar = deformation.frame_inverse(X) @ Li
    tbar = np.einsum("...sn,...n->...s", Lx, np.asarray(t, dtype=float))
    gbar = gauge_connection(deformation, L, X)
    return Xbar - np.einsum("...s,...nsm,...un->...um", tbar, gbar, Xbar)


def mobile_frame_derivative(deformation: DeformationField, x, s: int, steps=(1e-3, 5e-4)):
    """Difference quotients ``(X_m - X_par_m) / t^s`` for the given step sizes, and their extrapolation.

    Returns ``(quotients, extrapolated, expected)`` where ``expected`` is
    ``gamma^n_{sm} X_n`` (columns indexed by ``m``).
    """
    x = np.asarray(x, dtype=float)
    n = deformation.dimension
    frame = deformation.frame_inverse(x)
    quotients = []
    for eps in steps:
        t = np.zeros(n)
        t[s] = eps
        g = pure_translation(constant_element(t, deformation.chart))
        moved = dt_action_frame(deformation, g, x)
        quotients.append((frame - moved) / eps)
    e1, e2 = steps[0], steps[1]
    extrapolated = (e1 * quotients[1] - e2 * quotients[0]) / (e1 - e2)
    gamma = connection_coefficients(deformation, x)
    expected = np.einsum("nm,un->um", gamma[:, s, :], frame)
    return quotients, extrapolated, expected


def frame_commutator_coefficients(deformation: DeformationField, X) -> np.ndarray:
    """``F^m_{kl} = h^m_mu (h^nu_k d_nu h^mu_l - h^nu_l d_nu h^mu_k)``."""
    X = np.asarray(X, dtype=float)
    h = deformation.frame(X)
    hinv = np.linalg.inv(h)
    d_hinv = gradient(deformation.frame.inverse_field(), X)  # [nu, mu, l]
    P = np.einsum("...mu,...vk,...vul->...mkl", h, hinv, d_hinv)
    return P - np.swapaxes(P, -1, -2)


def dt_structure(deformation: DeformationField, X) -> DTStructure:
    """Structure functions of the group of parallel transports for translation pairs."""
    X = np.asarray(X, dtype=float)
    F = frame_commutator_coefficients(deformation, X)
    gamma = connection_coefficients(deformation, X)
    dgamma = gradient(gamma_field(deformation), X)  # [sig, m, l, n]
    hinv = deformation.frame_inverse(X)
    Xg = np.einsum("...sk,...smln->...mnkl", hinv, dgamma)  # X_k gamma^m_{ln}
    P = Xg + np.einsum("...mks,...sln->...mnkl", gamma, gamma)
    F_linear = (P - np.swapaxes(P, -1, -2)) - np.einsum("...msn,...skl->...mnkl", gamma, F)
    return DTStructure(F, F_linear)


def covariant_generator(deformation: DeformationField, w: ChartField, X) -> np.ndarray:
    """Translation generators applied to a frame-component field: ``[..., k, m] = X_k w^m + gamma^m_{kn} w^n``."""
    X = np.asarray(X, dtype=float)
    dw = gradient(w, X)  # [..., mu, *w.shape]
    hinv = deformation.frame_inverse(X)
    gamma = connection_coefficients(deformation, X)
    if w.shape == (deformation.dimension,):
        deriv = np.einsum("...uk,...um->...km", hinv, dw)
        return deriv + np.einsum("...mkn,...n->...km", gamma, w(X))
    # w carries an extra leading index: w[..., l, m]
    deriv = np.einsum("...uk,...ulm->...klm", hinv, dw)
    return deriv + np.einsum("...mkn,...ln->...klm", gamma, w(X))


def random_probes(n: int, count: int, seed: int = 0, center=None, chart=None) -> list[ChartField]:
    """Seeded vector fields with components quadratic in the coordinates, with exact gradients."""
    rng = np.random.default_rng(seed)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    probes = []
    for _ in range(count):
        a0 = rng.normal(size=n)
        a1 = rng.normal(size=(n, n))
        a2 = rng.normal(size=(n, n, n)) * 0.5

        def f(X, a0=a0, a1=a1, a2=a2):
            Y = np.asarray(X, dtype=float) - c
            return a0 + np.einsum("mi,...i->...m", a1, Y) + np.einsum("mij,...i,...j->...m", a2, Y, Y)

        def df(X, a1=a1, a2=a2):
            Y = np.asarray(X, dtype=float) - c
            lin = np.einsum("muj,...j->...um", a2, Y) + np.einsum("mju,...j->...um", a2, Y)
            return np.broadcast_to(a1.T, lin.shape) + lin

        probes.append(ChartField(f, (n,), chart, grad=df))
    return probes


def commutator_residuals(
    deformation: DeformationField,
    X,
    probes: Sequence[ChartField],
    k: Optional[int] = None,
    l: Optional[int] = None,
) -> np.ndarray:
    """Per-point max over probes and components of
    ``[nabla_k, nabla_l] tau - (F^s_{kl} nabla_s tau + R^m_{nkl} tau^n)``.
    """
    X = np.asarray(X, dtype=float)
    n = deformation.dimension
    F = frame_commutator_coefficients(deformation, X)
    R = extract_expansion(deformation, X).R  # [m, n, k, l]
    worst = np.zeros(X.shape[:-1])
    for tau in probes:
        first = ChartField(lambda Y, tau=tau: covariant_generator(deformation, tau, Y), (n, n), deformation.chart, nested=True)
        second = covariant_generator(deformation, first, X)  # [..., k, l, m] = nabla_k nabla_l tau
        lhs = second - np.swapaxes(second, -3, -2)
        nab = first(X)  # [..., s, m]
        rhs = np.einsum("...skl,...sm->...klm", F, nab) + np.einsum("...mnkl,...n->...klm", R, tau(X))
        res = np.abs(lhs - rhs)
        if k is not None:
            res = res[..., k : k + 1, :, :]
        if l is not None:
            res = res[..., :, l : l + 1, :]
        worst = np.maximum(worst, np.max(res, axis=(-3, -2, -1)))
    return worst


def commutator_check(
    deformation: DeformationField,
    X,
    probes: Sequence[ChartField],
    k: Optional[int] = None,
    l: Optional[int] = None,
) -> float:
    """Max of :func:`commutator_residuals` over the points."""
    return float(np.max(commutator_residuals(deformation, X, probes, k, l)))


def cartan_residual(deformation: DeformationField, X) -> tuple[float, float]:
    """Max residuals of the two structure equations with forms built from ``h`` and ``gamma``.

    2-form components use ``A = 1/2 A_{mu nu} dx^mu ^ dx^nu``.
    """
    X = np.asarray(X, dtype=float)
    h = deformation.frame(X)
    dh = gradient(deformation.frame.field, X)  # [mu, m, nu]
    gamma = connection_coefficients(deformation, X)
    omega = np.einsum("...mkn,...ku->...mun", gamma, h)  # omega^m_n = omega[m, mu, n] dx^mu

    d_omega1 = np.einsum("...umv->...muv", dh)
    d_omega1 = d_omega1 - np.swapaxes(d_omega1, -1, -2)
    wedge1 = np.einsum("...nu,...mvn->...muv", h, omega)
    wedge1 = wedge1 - np.swapaxes(wedge1, -1, -2)
    res1 = float(np.max(np.abs(d_omega1 - wedge1)))

    n = deformation.dimension

    def omega_coord(Y):
        return np.einsum("...mkn,...ku->...mun", connection_coefficients(deformation, Y), deformation.frame(Y))

    d_om = gradient(ChartField(omega_coord, (n, n, n), deformation.chart, nested=True), X)  # [a, m, b, n]
    d_omega2 = np.einsum("...ambn->...mnab", d_om)
    d_omega2 = d_omega2 - np.swapaxes(d_omega2, -1, -2)
    wedge2 = np.einsum("...kun,...mvk->...mnuv", omega, omega)
    wedge2 = wedge2 - np.swapaxes(wedge2, -1, -2)
    R = extract_expansion(deformation, X).R
    R2 = np.einsum("...mnkl,...ku,...lv->...mnuv", R, h, h)
    res2 = float(np.max(np.abs(d_omega2 - wedge2 - R2)))
    return res1, res2


def closure_deviation(deformation: DeformationField, a, b, x) -> np.ndarray:
    """Linear part minus identity for the product of pure translations by constant frame vectors ``a`` then ``b``.

    With a batch of points, `a` and `b` may carry the same batch axes (one
    constant pair per point).
    """
    chart = deformation.chart
    n = deformation.dimension

    def const(v):
        v = np.asarray(v, dtype=float)
        return GroupElement(ChartField(lambda Y: np.broadcast_to(v, np.shape(Y)), (n,), chart))

    g1 = pure_translation(const(a))
    g2 = pure_translation(const(b))
    val = dt_multiply(deformation, g1, g2, x)
    return val.L - np.eye(deformation.dimension)


def closure_curvature_residual(deformation: DeformationField, a, b, x, eps: float = 4e-3):
    """Compare the antisymmetrised closure defect with ``R^m_{nkl} a^k b^l``.

    ``D(e a, e b) - D(e b, e a) = e^2 R(a, b) + O(e^3)``.  The quotient by
    ``e^2`` is extrapolated from ``e, e/2, e/4``, removing the linear and
    quadratic remainders.  The step is divided by the local size of the
    connection, which sets the length scale of the higher-order terms.
    Accepts a batch of points and returns one residual per point.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    gamma = connection_coefficients(deformation, x)
    size = np.max(np.abs(gamma), axis=(-3, -2, -1))
    e0 = (eps / np.maximum(1.0, size))[..., None]

    def quotient(e):
        D = closure_deviation(deformation, e * a, e * b, x) - closure_deviation(deformation, e * b, e * a, x)
        return D / (e**2)[..., None]

    est = (8.0 * quotient(e0 / 4) - 6.0 * quotient(e0 / 2) + quotient(e0)) / 3.0
    R = extract_expansion(deformation, x).R
    res = np.max(np.abs(est - np.einsum("...mnkl,k,l->...mn", R, a, b)), axis=(-2, -1))
    return float(res) if res.ndim == 0 else res


@dataclass(frozen=True)
class ClosureResult:
    closed: bool
    max_deviation: float
    witness: Optional[np.ndarray]
    evaluated: int


def dt_subgroup_closure_check(deformation: DeformationField, sample, a=None, b=None, tol: float = 1e-6) -> ClosureResult:
    """Whether products of the pure translations ``{a, 1}`` and ``{b, 1}`` stay pure translations on `sample`.

    Sample points whose products leave the chart are skipped; ``evaluated``
    counts the rest.
    """
    n = deformation.dimension
    if a is None:
        a = np.full(n, 0.2) / np.sqrt(n)
    if b is None:
        b = np.zeros(n)
        b[0 if n == 1 else 1] = 0.2
    worst, witness, count = 0.0, None, 0
    for x in np.atleast_2d(np.asarray(sample, dtype=float)):
        try:
            dev = float(np.max(np.abs(closure_deviation(deformation, a, b, x))))
        except DomainError:
            continue
        count += 1
        if dev > worst:
            worst, witness = dev, x
    if count == 0:
        raise DomainError("no sample point keeps the translations inside the chart")
    closed = worst <= tol
    return ClosureResult(closed, worst, None if closed else witness, count)
