"""Reference loops on the unit sphere in ``(theta, phi)`` coordinates."""
from __future__ import annotations

import numpy as np

from .transport import Curve, Segment

__all__ = ["unit_vector", "great_circle_arc", "geodesic_triangle", "triangle_area"]


def unit_vector(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def great_circle_arc(a, b) -> Segment:
    """Constant-speed arc from `a` to `b` (unit vectors) with exact chart velocity."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    om = float(np.arccos(np.clip(a @ b, -1.0, 1.0)))

    def embed(s):
        s = np.asarray(s, dtype=float)[..., None]
        p = (np.sin((1 - s) * om) * a + np.sin(s * om) * b) / np.sin(om)
        dp = om * (-np.cos((1 - s) * om) * a + np.cos(s * om) * b) / np.sin(om)
        return p, dp

    def position(s):
        p, _ = embed(s)
        return np.stack([np.arccos(np.clip(p[..., 2], -1, 1)), np.mod(np.arctan2(p[..., 1], p[..., 0]), 2 * np.pi)], -1)

    def velocity(s):
        p, dp = embed(s)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        return np.stack([-dp[..., 2] / np.sqrt(1 - z * z), (x * dp[..., 1] - y * dp[..., 0]) / (x * x + y * y)], -1)

    return Segment(position, velocity, om)


def geodesic_triangle(vertices) -> Curve:
    """Closed loop of great-circle arcs through ``(theta, phi)`` vertices."""
    V = [unit_vector(*v) for v in vertices]
    return Curve(tuple(great_circle_arc(V[i], V[(i + 1) % len(V)]) for i in range(len(V))))


def triangle_area(vertices) -> float:
    """Solid angle of a spherical triangle (Van Oosterom and Strackee)."""
    a, b, c = (unit_vector(*v) for v in vertices)
    return float(2 * np.arctan2(abs(a @ np.cross(b, c)), 1 + a @ b + b @ c + c @ a))
