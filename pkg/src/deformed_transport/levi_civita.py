"""Classical Riemannian quantities computed straight from the metric.

These are the reference values the group-theoretic constructions are
checked against.  Index layout conventions used throughout the package:

* coframe ``h[..., m, mu] = h^m_mu`` and frame ``hinv[..., mu, m] = h^mu_m``;
* connection ``G[..., rho, mu, nu] = Gamma^rho_{mu nu}``;
* curvature ``R[..., mu, lam, kap, nu] = R^mu_{lam kap nu}``, antisymmetric
  in the last two slots.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Chart, ChartField, GeometryError, gradient

__all__ = [
    "DegenerateMetric",
    "NotPositiveDefinite",
    "MetricField",
    "FrameField",
    "ConnectionField",
    "christoffel",
    "levi_civita_connection",
    "riemann",
    "orthonormal_frame",
    "frame_field",
    "anholonomity",
    "metricity_residual",
    "to_frame",
    "to_coordinates",
]


class DegenerateMetric(GeometryError):
    pass


class NotPositiveDefinite(DegenerateMetric):
    pass


@dataclass(frozen=True)
class MetricField:
    field: ChartField

    @property
    def chart(self) -> Chart:
        return self.field.chart

    @property
    def dimension(self) -> int:
        return self.field.shape[0]

    def __call__(self, X) -> np.ndarray:
        g = self.field(X)
        det = np.linalg.det(g)
        if np.any(np.abs(det) <= 1e-12):
            raise DegenerateMetric("metric determinant vanishes")
        return g

    def inverse(self, X) -> np.ndarray:
        return np.linalg.inv(self(X))


@dataclass(frozen=True)
class FrameField:
    """Coframe ``h^m_mu`` as a chart field; the frame vectors are the columns of its inverse."""

    field: ChartField

    @property
    def chart(self) -> Chart:
        return self.field.chart

    def __call__(self, X) -> np.ndarray:
        return self.field(X)

    def inverse(self, X) -> np.ndarray:
        h = self.field(X)
        if np.any(np.abs(np.linalg.det(h)) < 1e-300):
            raise GeometryError("frame is singular")
        return np.linalg.inv(h)

    def inverse_field(self) -> ChartField:
        return ChartField(self.inverse, self.field.shape, self.field.chart, nested=self.field.nested, indices="^mu_m")


@dataclass(frozen=True)
class ConnectionField:
    """Torsion-free connection coefficients, stored symmetric in the lower pair."""

    field: ChartField

    @property
    def chart(self) -> Chart:
        return self.field.chart

    def __call__(self, X) -> np.ndarray:
        return self.field(X)


def _symmetrize_lower(G: np.ndarray) -> np.ndarray:
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def christoffel(metric: MetricField, X) -> np.ndarray:
    """Christoffel symbols of the second kind at `X`."""
    X = np.asarray(X, dtype=float)
    ginv = metric.inverse(X)
    dg = gradient(metric.field, X)  # dg[..., a, b, c] = d_a g_bc
    first = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
    # first[..., mu, nu, sigma] = d_mu g_nu,sigma + d_nu g_mu,sigma - d_sigma g_mu,nu
    G = 0.5 * np.einsum("...rs,...mns->...rmn", ginv, first)
    return _symmetrize_lower(G)


def levi_civita_connection(metric: MetricField) -> ConnectionField:
    n = metric.dimension
    return ConnectionField(
        ChartField(lambda X: christoffel(metric, X), (n, n, n), metric.chart, nested=True, indices="^r_mn")
    )


def riemann(connection: ConnectionField, X) -> np.ndarray:
    """``R^mu_{lam kap nu} = d_kap G^mu_{nu lam} - d_nu G^mu_{kap lam} + G^mu_{kap s} G^s_{nu lam} - G^mu_{nu s} G^s_{kap lam}``."""
    X = np.asarray(X, dtype=float)
    G = connection(X)
    dG = gradient(connection.field, X)  # [..., kap, mu, nu, lam]
    A = np.einsum("...kmnl->...mlkn", dG)
    B = np.einsum("...mks,...snl->...mlkn", G, G)
    P = A + B
    return P - np.swapaxes(P, -1, -2)


def orthonormal_frame(metric: MetricField, X) -> np.ndarray:
    """Lower-triangular coframe with positive diagonal and ``h^T h = g``."""
    g = metric(X)
    rev = g[..., ::-1, ::-1]
    try:
        L = np.linalg.cholesky(rev)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("metric is not positive definite") from None
    return np.swapaxes(L, -1, -2)[..., ::-1, ::-1].copy()


def frame_field(metric: MetricField) -> FrameField:
    n = metric.dimension
    return FrameField(ChartField(lambda X: orthonormal_frame(metric, X), (n, n), metric.chart, indices="^m_mu"))


def anholonomity(frame: FrameField, X, frame_indices: bool = False) -> np.ndarray:
    """Structure functions ``F^n_{mu nu} = -(d_mu h^n_nu - d_nu h^n_mu)`` of a coframe.

    With `frame_indices` the lower slots are converted with the frame,
    giving ``F^n_{kl}``, the coefficients of ``[X_k, X_l] = F^n_{kl} X_n``.
    The anholonomity coefficients proper are ``-F / 2``.
    """
    X = np.asarray(X, dtype=float)
    dh = gradient(frame.field, X)  # [..., mu, n, nu]
    A = np.einsum("...mnv->...nmv", dh)
    F = -(A - np.swapaxes(A, -1, -2))
    if not frame_indices:
        return F
    hinv = frame.inverse(X)
    P = np.einsum("...nuv,...uk,...vl->...nkl", A, hinv, hinv)
    return -(P - np.swapaxes(P, -1, -2))


def metricity_residual(metric: MetricField, connection: ConnectionField, X) -> np.ndarray:
    """``d_s g_mn - G._{m n s} - G._{n m s}``, indexed ``[..., mu, nu, sigma]``."""
    X = np.asarray(X, dtype=float)
    g = metric(X)
    dg = gradient(metric.field, X)  # [..., s, m, n]
    lowered = np.einsum("...mr,...rns->...mns", g, connection(X))
    return np.moveaxis(dg, -3, -1) - lowered - np.swapaxes(lowered, -3, -2)


def to_frame(T: np.ndarray, h: np.ndarray, hinv: np.ndarray, upper: int = 1) -> np.ndarray:
    """Convert a coordinate tensor with `upper` leading upper slots to frame components."""
    rank = T.ndim - (h.ndim - 2)
    src, dst = "abcdef"[:rank], "ABCDEF"[:rank]
    ops = [f"...{dst[i]}{src[i]}" if i < upper else f"...{src[i]}{dst[i]}" for i in range(rank)]
    mats = [h if i < upper else hinv for i in range(rank)]
    return np.einsum(f"...{src},{','.join(ops)}->...{dst}", T, *mats)


def to_coordinates(T: np.ndarray, h: np.ndarray, hinv: np.ndarray, upper: int = 1) -> np.ndarray:
    """Inverse of :func:`to_frame`."""
    return to_frame(T, hinv, h, upper)
