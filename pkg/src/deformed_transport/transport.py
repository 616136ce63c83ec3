"""Parallel transport from the first-order group action.

``lambda(x, t)`` is the derivative of the group product in its second
factor at zero.  It carries a vector given at ``x' = x + H_x^{-1}(t)`` back
to ``x``; marching forward along a curve therefore uses its inverse, or
equivalently integrates ``d tau^m/ds = -gamma^m_{kn} v^k tau^n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .deformed_group import DeformationField, _moved_point, connection_coefficients, jet_apply, jet_invert
from .fields import ChartField, DomainError, GeometryError, gradient
from .levi_civita import ConnectionField

__all__ = [
    "CurveError",
    "TransportMatrix",
    "Segment",
    "Curve",
    "lambda_matrix",
    "coordinate_lambda",
    "transport_vector",
    "transport_vector_coordinates",
    "covariant_derivative",
    "transport_along_curve",
    "transport_operator",
    "holonomy",
    "rotation_angle",
    "curve_length",
]


class CurveError(GeometryError):
    pass


@dataclass(frozen=True)
class TransportMatrix:
    matrix: np.ndarray
    source: np.ndarray  # x'
    target: np.ndarray  # x

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def lambda_matrix(deformation: DeformationField, x, t) -> TransportMatrix:
    """``lambda(x, t)^m_n``: Jacobian of ``H_x`` at ``H_x^{-1}(t)`` times ``h(x')^{-1}``."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    n = deformation.dimension
    if not np.any(t):
        return TransportMatrix(np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy(), x.copy(), x.copy())
    jet = deformation.jet(x)
    disp = jet_invert(jet)(t)
    xp = _moved_point(deformation, x, disp)
    J = jet.polymap().jacobian(disp)
    hinv_p = deformation.frame_inverse(xp)
    return TransportMatrix(J @ hinv_p, xp, x)


def coordinate_lambda(deformation: DeformationField, x, t) -> TransportMatrix:
    """Coordinate-basis transport: derivative of the bracket of ``H_x`` at ``H_x^{-1}(t)``."""
    x = np.asarray(x, dtype=float)
    jet = deformation.jet(x)
    disp = jet_invert(jet)(np.asarray(t, dtype=float))
    xp = _moved_point(deformation, x, disp)
    hinv = np.linalg.inv(jet.h)
    return TransportMatrix(hinv @ jet.polymap().jacobian(disp), xp, x)


def transport_vector(deformation: DeformationField, x, t, tau) -> np.ndarray:
    """Frame components at ``x`` of the vector ``tau`` given in frame components at ``x'``."""
    lam = lambda_matrix(deformation, x, t).matrix
    return np.einsum("...mn,...n->...m", lam, np.asarray(tau, dtype=float))


def transport_vector_coordinates(deformation: DeformationField, x, t, tau) -> np.ndarray:
    """Coordinate-component variant of :func:`transport_vector`."""
    lam = coordinate_lambda(deformation, x, t).matrix
    return np.einsum("...mn,...n->...m", lam, np.asarray(tau, dtype=float))


def covariant_derivative(connection: ConnectionField, fld: ChartField, X, direction: Optional[int] = None) -> np.ndarray:
    """``nabla_nu tau^mu = d_nu tau^mu + G^mu_{s nu} tau^s``; indexed ``[..., nu, mu]`` unless `direction` is given."""
    X = np.asarray(X, dtype=float)
    d = gradient(fld, X)  # [..., nu, mu]
    out = d + np.einsum("...msn,...s->...nm", connection(X), fld(X))
    return out if direction is None else out[..., direction, :]


@dataclass(frozen=True)
class Segment:
    position: Callable[[np.ndarray], np.ndarray]  # s in [0, 1] -> (..., n)
    velocity: Optional[Callable[[np.ndarray], np.ndarray]] = None
    weight: float = 1.0

    def point(self, s) -> np.ndarray:
        return np.asarray(self.position(np.asarray(s, dtype=float)), dtype=float)

    def tangent(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.velocity is not None:
            return np.asarray(self.velocity(s), dtype=float)
        step = 1e-6
        return (self.point(s + step) - self.point(s - step)) / (2 * step)


@dataclass(frozen=True)
class Curve:
    """Concatenation of smooth segments; segment ``i`` occupies a share of ``[0, 1]`` proportional to its weight."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise CurveError("curve needs at least one segment")
        if any(not seg.weight > 0 for seg in self.segments):
            raise CurveError("segment weights must be positive")

    @classmethod
    def polygon(cls, vertices: Sequence[Sequence[float]], closed: bool = True) -> "Curve":
        V = [np.asarray(v, dtype=float) for v in vertices]
        if closed:
            V = V + [V[0]]
        segs = []
        for a, b in zip(V[:-1], V[1:]):
            segs.append(
                Segment(
                    lambda s, a=a, b=b: a + np.multiply.outer(s, b - a),
                    lambda s, a=a, b=b: np.broadcast_to(b - a, np.shape(s) + a.shape),
                    float(np.linalg.norm(b - a)) or 1.0,
                )
            )
        return cls(tuple(segs))

    def reversed(self) -> "Curve":
        segs = []
        for seg in reversed(self.segments):
            vel = seg.velocity
            segs.append(
                Segment(
                    lambda s, p=seg.position: p(1.0 - np.asarray(s)),
                    None if vel is None else (lambda s, v=vel: -v(1.0 - np.asarray(s))),
                    seg.weight,
                )
            )
        return Curve(tuple(segs))

    @property
    def start(self) -> np.ndarray:
        return self.segments[0].point(0.0)

    @property
    def end(self) -> np.ndarray:
        return self.segments[-1].point(1.0)

    def is_closed(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.start - self.end)) <= tol)

    def allocate(self, steps: int) -> list[int]:
        """Steps per segment, at least one each, proportional to weight."""
        w = np.array([seg.weight for seg in self.segments], dtype=float)
        raw = steps * w / w.sum()
        return [max(1, int(round(r))) for r in raw]


def _segment_generators(deformation: DeformationField, seg: Segment, k: int):
    """``A(s)^m_n = gamma^m_{kn} v^k`` at the RK4 nodes of a segment split into `k` steps."""
    s = np.linspace(0.0, 1.0, 2 * k + 1)
    P = seg.point(s)
    chart = deformation.chart
    if chart is not None and not np.all(chart.contains(P, shrunk=True)):
        raise DomainError("curve leaves the margin-shrunk chart")
    V = seg.tangent(s)
    gamma = connection_coefficients(deformation, P)
    v_frame = np.einsum("...mu,...u->...m", deformation.frame(P), V)
    return np.einsum("...mkn,...k->...mn", gamma, v_frame), P


def _rk4_operator(A: np.ndarray, k: int) -> np.ndarray:
    n = A.shape[-1]
    M = np.eye(n)
    dt = 1.0 / k
    for i in range(k):
        A0, Ah, A1 = A[2 * i], A[2 * i + 1], A[2 * i + 2]
        k1 = -A0 @ M
        k2 = -Ah @ (M + 0.5 * dt * k1)
        k3 = -Ah @ (M + 0.5 * dt * k2)
        k4 = -A1 @ (M + dt * k3)
        M = M + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return M


def _lambda_operator(deformation: DeformationField, seg: Segment, k: int) -> np.ndarray:
    n = deformation.dimension
    s = np.linspace(0.0, 1.0, k + 1)
    P = seg.point(s)
    chart = deformation.chart
    if chart is not None and not np.all(chart.contains(P, shrunk=True)):
        raise DomainError("curve leaves the margin-shrunk chart")
    M = np.eye(n)
    for a, b in zip(P[:-1], P[1:]):
        if np.all(a == b):
            continue
        t = jet_apply(deformation.jet(a), b - a)
        lam = lambda_matrix(deformation, a, t).matrix
        M = np.linalg.solve(lam, M)
    return M


def transport_operator(deformation: DeformationField, curve: Curve, steps: int, method: str = "rk4") -> np.ndarray:
    """Matrix carrying frame components at the curve start to the curve end."""
    if steps < 1:
        raise ValueError("steps must be positive")
    n = deformation.dimension
    M = np.eye(n)
    for seg, k in zip(curve.segments, curve.allocate(steps)):
        if method == "rk4":
            A, _ = _segment_generators(deformation, seg, k)
            M = _rk4_operator(A, k) @ M
        elif method == "lambda":
            M = _lambda_operator(deformation, seg, k) @ M
        else:
            raise ValueError(f"unknown transport method {method!r}")
    return M


def transport_along_curve(deformation: DeformationField, curve: Curve, tau0, steps: int, method: str = "rk4") -> np.ndarray:
    return transport_operator(deformation, curve, steps, method) @ np.asarray(tau0, dtype=float)


def holonomy(deformation: DeformationField, loop: Curve, steps: int, method: str = "rk4") -> np.ndarray:
    if not loop.is_closed():
        raise CurveError("loop is not closed: endpoints differ by more than 1e-12")
    return transport_operator(deformation, loop, steps, method)


def rotation_angle(M: np.ndarray) -> float:
    """Signed angle for 2x2 matrices, largest principal angle otherwise."""
    M = np.asarray(M, dtype=float)
    if M.shape == (2, 2):
        return float(np.arctan2(M[1, 0] - M[0, 1], M[0, 0] + M[1, 1]))
    eig = np.linalg.eigvals(M)
    return float(np.max(np.abs(np.angle(eig))))


def curve_length(metric, curve: Curve, steps: int = 2000) -> float:
    """Riemannian length by composite Simpson quadrature on each segment."""
    total = 0.0
    for seg, k in zip(curve.segments, curve.allocate(steps)):
        s = np.linspace(0.0, 1.0, 2 * k + 1)
        P, V = seg.point(s), seg.tangent(s)
        speed = np.sqrt(np.einsum("...u,...uv,...v->...", V, metric(P), V))
        w = np.ones_like(s)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        total += float(np.sum(w * speed) / (6.0 * k))
    return total
