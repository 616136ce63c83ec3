"""Identity suite run by ``deformed-transport verify``.

Each check evaluates one geometric identity at a set of sample points and
reports the worst residual with the point where it occurred.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from .deformed_group import build_deformation, deformation_for, extract_expansion
from .dt_group import (
    cartan_residual,
    closure_curvature_residual,
    commutator_residuals,
    dt_structure,
    frame_commutator_coefficients,
    random_probes,
)
from .fields import DomainError
from .levi_civita import anholonomity, levi_civita_connection, metricity_residual, riemann, to_frame

__all__ = ["DEFAULT_TOLERANCES", "CheckResult", "run_suite", "frame_riemann"]

DEFAULT_TOLERANCES = {
    "metricity": 1e-6,
    "maurer-cartan": 1e-4,
    "structure-functions": 1e-8,
    "cartan-1": 1e-5,
    "cartan-2": 1e-5,
    "eq41-vs-riemann": 1e-5,
    "group-curvature": 1e-5,
    "delta-independence": 1e-9,
    "dt-closure": 1e-5,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_residual: float
    samples: int
    tolerance: float
    witness: Optional[np.ndarray]

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tolerance)

    def as_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
        }


def frame_riemann(deformation, X) -> np.ndarray:
    """Riemann tensor of the deformation's connection in frame components ``[..., m, n, k, l]``."""
    h = deformation.frame(X)
    return to_frame(riemann(deformation.connection, X), h, np.linalg.inv(h), upper=1)


def _pointwise(name: str, X: np.ndarray, residuals: np.ndarray, tol: float) -> CheckResult:
    per_point = np.max(np.abs(residuals).reshape(len(X), -1), axis=1)
    i = int(np.argmax(per_point))
    return CheckResult(name, float(per_point[i]), len(X), tol, X[i])


def _per_point(name: str, X: np.ndarray, func: Callable[[np.ndarray], float], tol: float) -> CheckResult:
    worst, witness, count = -np.inf, None, 0
    for x in X:
        try:
            r = func(x)
        except DomainError:
            continue
        count += 1
        if r > worst:
            worst, witness = r, x
    if count == 0:
        return CheckResult(name, float("nan"), 0, tol, None)
    return CheckResult(name, float(worst), count, tol, witness)


def run_suite(manifold, samples: int = 20, seed: int = 0, tolerances: Optional[Mapping[str, float]] = None, probes: int = 10):
    """Run every identity on `samples` seeded points; returns ``{name: CheckResult}``."""
    tol = dict(DEFAULT_TOLERANCES)
    if tolerances:
        unknown = set(tolerances) - set(tol)
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        tol.update(tolerances)
    X = manifold.sample(samples, seed)
    n = manifold.dimension
    metric = manifold.metric
    d = deformation_for(manifold, "geodesic")
    d0 = build_deformation(d.frame, d.connection, "zero")
    R_frame = frame_riemann(d, X)
    out = {}

    out["metricity"] = _pointwise("metricity", X, metricity_residual(metric, levi_civita_connection(metric), X), tol["metricity"])

    center = manifold.chart.domain.mean(axis=1)
    probe_fields = random_probes(n, probes, seed=seed, center=center, chart=manifold.chart)
    out["maurer-cartan"] = _pointwise("maurer-cartan", X, commutator_residuals(d, X, probe_fields), tol["maurer-cartan"])

    F40 = frame_commutator_coefficients(d, X)
    out["structure-functions"] = _pointwise(
        "structure-functions", X, F40 - anholonomity(d.frame, X, frame_indices=True), tol["structure-functions"]
    )

    res = [cartan_residual(d, x) for x in X]
    r1 = np.array([r[0] for r in res])
    r2 = np.array([r[1] for r in res])
    out["cartan-1"] = _pointwise("cartan-1", X, r1, tol["cartan-1"])
    out["cartan-2"] = _pointwise("cartan-2", X, r2, tol["cartan-2"])

    out["eq41-vs-riemann"] = _pointwise("eq41-vs-riemann", X, dt_structure(d, X).F_linear - R_frame, tol["eq41-vs-riemann"])
    R_geo = extract_expansion(d, X).R
    out["group-curvature"] = _pointwise("group-curvature", X, R_geo - R_frame, tol["group-curvature"])
    out["delta-independence"] = _pointwise(
        "delta-independence", X, R_geo - extract_expansion(d0, X).R, tol["delta-independence"]
    )

    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=n), rng.normal(size=n)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    try:
        out["dt-closure"] = _pointwise("dt-closure", X, closure_curvature_residual(d, a, b, X), tol["dt-closure"])
    except DomainError:
        # some product leaves the chart; evaluate point by point and skip those
        out["dt-closure"] = _per_point("dt-closure", X, lambda x: closure_curvature_residual(d, a, b, x), tol["dt-closure"])
    return out
