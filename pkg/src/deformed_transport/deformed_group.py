"""Deformations of the translation group and the deformed group of diffeomorphisms.

A deformation map sends a coordinate displacement ``u`` at ``x`` to frame
parameters::

    H_x(u) = h(x) [u + 1/2 G(x) u u + 1/6 D(x) u u u]

and the group acts by ``x -> x + H_x^{-1}(t(x))``.  Group elements are
translation fields ``t(x)`` in frame components; the product of two of them
is ``H_x(H_x^{-1}(t(x)) + H_{x'}^{-1}(t'(x')))`` evaluated with the order-3
jets.  The expansion of that product around the identity carries the
connection (second order) and the curvature (skew part of third order).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np

from .fields import Chart, ChartField, DomainError, GeometryError, gradient
from .levi_civita import ConnectionField, FrameField, frame_field, levi_civita_connection, to_frame
from .series import PolyMap, symmetrize

__all__ = [
    "DeltaPolicy",
    "DeformationJet",
    "DeformationField",
    "ExpansionCoefficients",
    "GroupElement",
    "TranslationLeavesChart",
    "jet_apply",
    "jet_invert",
    "jet_from_polymap",
    "geodesic_delta",
    "build_deformation",
    "deformation_for",
    "constant_element",
    "multiply",
    "connection_coefficients",
    "extract_expansion",
    "compose_deformations",
    "compose_jets",
]

DeltaPolicy = Literal["geodesic", "zero"]


class TranslationLeavesChart(DomainError):
    pass


@dataclass(frozen=True)
class DeformationJet:
    """Order-3 Taylor data of a deformation map at one point (or a batch of points)."""

    h: np.ndarray  # (..., n, n)      h^m_mu
    gamma: np.ndarray  # (..., n, n, n)   G^mu_{nu rho}
    delta: np.ndarray  # (..., n, n, n, n)
    point: Optional[np.ndarray] = None

    def __post_init__(self):
        if np.any(np.abs(np.linalg.det(self.h)) < 1e-300):
            raise GeometryError("deformation jet has a singular linear part")

    @classmethod
    def identity(cls, n: int) -> "DeformationJet":
        return cls(np.eye(n), np.zeros((n, n, n)), np.zeros((n, n, n, n)))

    @property
    def dimension(self) -> int:
        return self.h.shape[-1]

    def polymap(self) -> PolyMap:
        return PolyMap(
            self.h,
            0.5 * np.einsum("...mu,...uab->...mab", self.h, self.gamma),
            np.einsum("...mu,...uabc->...mabc", self.h, self.delta) / 6.0,
        )


def jet_apply(jet: DeformationJet, u) -> np.ndarray:
    """``h [u + G u u / 2 + D u u u / 6]``."""
    return jet.polymap()(u)


def jet_invert(jet: DeformationJet) -> PolyMap:
    """Series of ``H^{-1}`` through third order (frame parameters -> displacement)."""
    return jet.polymap().inverse()


def jet_from_polymap(P: PolyMap, point=None) -> DeformationJet:
    hinv = np.linalg.inv(P.c1)
    gamma = 2.0 * np.einsum("...um,...mab->...uab", hinv, P.c2)
    delta = 6.0 * np.einsum("...um,...mabc->...uabc", hinv, P.c3)
    return DeformationJet(P.c1, symmetrize(gamma, 2), symmetrize(delta, 3), point)


def compose_jets(jet1: DeformationJet, jet2: DeformationJet) -> DeformationJet:
    """Jet of ``H1 o H2`` at a common base point."""
    return jet_from_polymap(jet1.polymap().compose(jet2.polymap()), jet2.point)


def geodesic_delta(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """Third-order coefficient making ``u -> H^{-1}(h u)`` the geodesic exponential map.

    `dgamma` is indexed ``[..., lam, mu, a, b] = d_lam G^mu_{ab}``.  The
    geodesic with initial velocity ``v`` is
    ``x + v - G v v / 2 + C v v v / 6`` with
    ``C^mu_{lab} = -d_l G^mu_{ab} + 2 G^mu_{sb} G^s_{la}``; the bracket of
    the deformation is the series inverse of that map.
    """
    n = gamma.shape[-1]
    C = -np.einsum("...lmab->...mlab", dgamma) + 2.0 * np.einsum("...msb,...sla->...mlab", gamma, gamma)
    eye = np.broadcast_to(np.eye(n), gamma.shape[:-3] + (n, n))
    exp_series = PolyMap(eye, -0.5 * gamma, symmetrize(C, 3) / 6.0)
    log_series = exp_series.inverse()
    return symmetrize(6.0 * log_series.c3, 3)


@dataclass(frozen=True)
class DeformationField:
    """A smooth family of deformation maps over a chart."""

    frame: FrameField
    connection: ConnectionField
    delta_policy: DeltaPolicy = "geodesic"

    @property
    def chart(self) -> Chart:
        return self.frame.chart

    @property
    def dimension(self) -> int:
        return self.frame.field.shape[0]

    def jet(self, X) -> DeformationJet:
        X = np.asarray(X, dtype=float)
        n = self.dimension
        h = self.frame(X)
        gamma = self.connection(X)
        if self.delta_policy == "zero":
            delta = np.zeros(X.shape[:-1] + (n, n, n, n))
        else:
            delta = geodesic_delta(gamma, gradient(self.connection.field, X))
        return DeformationJet(h, gamma, delta, X)

    def frame_inverse(self, X) -> np.ndarray:
        return self.frame.inverse(X)


def build_deformation(frame: FrameField, connection: ConnectionField, delta_policy: DeltaPolicy = "geodesic") -> DeformationField:
    if delta_policy not in ("geodesic", "zero"):
        raise ValueError(f"unknown delta policy {delta_policy!r}")
    return DeformationField(frame, connection, delta_policy)


def deformation_for(manifold, delta_policy: DeltaPolicy = "geodesic") -> DeformationField:
    """Orthonormal-frame, Levi-Civita deformation of a catalog or spec manifold."""
    metric = manifold.metric
    return build_deformation(frame_field(metric), levi_civita_connection(metric), delta_policy)


@dataclass(frozen=True)
class GroupElement:
    """A translation field ``t^m(x)`` in frame components."""

    field: ChartField

    def __call__(self, X) -> np.ndarray:
        return self.field(X)

    def scaled(self, eps: float) -> "GroupElement":
        f = self.field
        return GroupElement(ChartField(lambda X: eps * f(X), f.shape, f.chart, nested=f.nested))

    def admissible(self, deformation: DeformationField, X) -> bool:
        """Whether ``x -> x + H_x^{-1}(t(x))`` has nonsingular Jacobian at `X`."""
        n = deformation.dimension

        def disp(Y):
            return jet_invert(deformation.jet(Y))(self.field(Y))

        J = gradient(ChartField(disp, (n,), deformation.chart, nested=True), X)  # [..., nu, mu]
        det = np.linalg.det(np.eye(n) + np.swapaxes(J, -1, -2))
        return bool(np.all(np.abs(det) > 1e-12))


def constant_element(values, chart: Optional[Chart] = None) -> GroupElement:
    v = np.asarray(values, dtype=float)
    return GroupElement(ChartField(lambda X: np.broadcast_to(v, np.shape(X)[:-1] + v.shape), v.shape, chart))


def element_from_function(func: Callable[[np.ndarray], np.ndarray], n: int, chart: Optional[Chart] = None) -> GroupElement:
    return GroupElement(ChartField(func, (n,), chart))


def _roundtrip_defect(jet: DeformationJet, inv: PolyMap, t: np.ndarray) -> np.ndarray:
    return jet_apply(jet, inv(t)) - t


def _moved_point(deformation: DeformationField, X, disp) -> np.ndarray:
    Xp = np.asarray(X, dtype=float) + disp
    chart = deformation.chart
    if chart is not None and not np.all(chart.contains(Xp)):
        raise TranslationLeavesChart("translation leaves chart")
    return Xp


def product_values(deformation: DeformationField, X, a, b_of_point: Callable[[np.ndarray], np.ndarray]):
    """Group product for the value ``a`` at `X` and a second factor evaluated at ``x'``.

    Returns ``(phi, x')``.  The round-trip defects ``H(H^{-1}(s)) - s``
    (fourth order in ``s``) of both factors are subtracted, so either factor
    being zero reproduces the other exactly.
    """
    X = np.asarray(X, dtype=float)
    a = np.asarray(a, dtype=float)
    jx = deformation.jet(X)
    kx = jx.polymap().inverse()
    s1 = kx(a)
    Xp = _moved_point(deformation, X, s1)
    b = np.asarray(b_of_point(Xp), dtype=float)
    jp = deformation.jet(Xp)
    kp = jp.polymap().inverse()
    s2 = kp(b)
    phi = jet_apply(jx, s1 + s2) - _roundtrip_defect(jx, kx, a) - (jet_apply(jp, s2) - b)
    return phi, Xp


def multiply(deformation: DeformationField, t: GroupElement, tp: GroupElement, X):
    """``((t * t')(x), x')`` for the deformed group of diffeomorphisms."""
    X = np.asarray(X, dtype=float)
    return product_values(deformation, X, t(X), tp)


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Expansion coefficients of the group law in frame indices.

    ``gamma[m, k, n]``, ``rho[m, l, k, n]``; ``F`` and ``R`` are their skew
    parts in the last two slots.
    """

    gamma: np.ndarray
    rho: np.ndarray
    F: np.ndarray
    R: np.ndarray


def connection_coefficients(deformation: DeformationField, X) -> np.ndarray:
    """``gamma^m_{kn} = h^m_mu (G^mu_{kn} + h^nu_k d_nu h^mu_n)`` at `X`."""
    X = np.asarray(X, dtype=float)
    h = deformation.frame(X)
    hinv = np.linalg.inv(h)
    d_hinv = gradient(deformation.frame.inverse_field(), X)  # [..., nu, mu, n]
    G = deformation.connection(X)
    G_frame_lower = np.einsum("...uab,...ak,...bn->...ukn", G, hinv, hinv)
    moved = np.einsum("...vk,...vun->...ukn", hinv, d_hinv)
    return np.einsum("...mu,...ukn->...mkn", h, G_frame_lower + moved)


def gamma_field(deformation: DeformationField) -> ChartField:
    n = deformation.dimension
    return ChartField(lambda X: connection_coefficients(deformation, X), (n, n, n), deformation.chart, nested=True, indices="^m_kn")


def extract_expansion(deformation: DeformationField, X) -> ExpansionCoefficients:
    """Second- and third-order expansion coefficients of the group law and their skew parts."""
    X = np.asarray(X, dtype=float)
    jet = deformation.jet(X)
    h, G, D = jet.h, jet.gamma, jet.delta
    hinv = np.linalg.inv(h)
    gamma = connection_coefficients(deformation, X)
    dG = gradient(deformation.connection.field, X)  # [..., nu, mu, kap, lam]
    # coordinate form rho^mu_{lam kap nu} = D - G^mu_{nu s} G^s_{kap lam} - d_nu G^mu_{kap lam}
    rho_c = D - np.einsum("...mns,...skl->...mlkn", G, G) - np.einsum("...nmkl->...mlkn", dG)
    rho = to_frame(rho_c, h, hinv, upper=1)
    F = gamma - np.swapaxes(gamma, -1, -2)
    R = rho - np.swapaxes(rho, -1, -2)
    return ExpansionCoefficients(gamma, rho, F, R)


def compose_deformations(def1: DeformationField, def2: DeformationField, X) -> DeformationJet:
    """Jet of ``(H1 o H2)_x``; ``h3 = h1 h2``, second order per the deformation-of-connection rule."""
    X = np.asarray(X, dtype=float)
    return compose_jets(def1.jet(X), def2.jet(X))
