"""Coordinate charts, chart fields and the finite-difference engine.

Every field is vectorised: an evaluator maps points of shape ``(..., n)``
to values of shape ``(..., *field.shape)``.  Derivatives come either from a
closed form supplied with the field or from central differences with step
``h = h0 * max(1, |x_mu|)``, optionally improved by one Richardson step.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

__all__ = [
    "GeometryError",
    "DomainError",
    "StencilOutOfDomain",
    "NonFiniteEvaluation",
    "FDPolicy",
    "Chart",
    "ChartField",
    "default_policy",
    "differentiate",
    "gradient",
    "sample_points",
]

FD_ENV_VAR = "DEFORMED_TRANSPORT_FD_H0"


class GeometryError(Exception):
    """Base class for numerical failures in this package."""


class DomainError(GeometryError):
    """A point (or a point a computation needs) lies outside the chart."""


class StencilOutOfDomain(DomainError):
    pass


class NonFiniteEvaluation(GeometryError):
    pass


@dataclass(frozen=True)
class FDPolicy:
    """Step policy for central differences.

    `h0` is used on fields with closed-form evaluators, `nested_h0` on fields
    whose evaluation already involves differencing (a second derivative of
    the underlying data).
    """

    h0: float = 1e-5
    nested_h0: float = 1e-4
    richardson: bool = False

    def __post_init__(self):
        if not (self.h0 > 0 and self.nested_h0 > 0):
            raise ValueError("finite-difference steps must be positive")

    def scaled(self, factor: float) -> "FDPolicy":
        return replace(self, h0=self.h0 * factor, nested_h0=self.nested_h0 * factor)


def default_policy(richardson: bool = True) -> FDPolicy:
    """Default policy, honouring the ``DEFORMED_TRANSPORT_FD_H0`` override."""
    raw = os.environ.get(FD_ENV_VAR)
    if raw:
        h0 = float(raw)
        if not h0 > 0:
            raise ValueError(f"{FD_ENV_VAR} must be a positive real, got {raw!r}")
        return FDPolicy(h0=h0, nested_h0=10.0 * h0, richardson=richardson)
    return FDPolicy(richardson=richardson)


@dataclass(frozen=True)
class Chart:
    domain: np.ndarray
    margins: Optional[np.ndarray] = None
    fd: FDPolicy = field(default_factory=default_policy)
    names: tuple[str, ...] = ()

    def __post_init__(self):
        domain = np.array(self.domain, dtype=float).reshape(-1, 2)
        if domain.shape[0] < 1:
            raise ValueError("chart dimension must be at least 1")
        lengths = domain[:, 1] - domain[:, 0]
        margins = 1e-3 * lengths if self.margins is None else np.array(self.margins, dtype=float)
        if margins.shape != lengths.shape or np.any(margins < 0):
            raise ValueError("margins must be non-negative, one per coordinate")
        if np.any(lengths - 2 * margins <= 0) or not np.all(np.isfinite(domain)):
            raise ValueError("every interval must keep positive length after margin removal")
        domain.setflags(write=False)
        margins.setflags(write=False)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "margins", margins)
        names = tuple(self.names) or tuple(f"x{i}" for i in range(len(domain)))
        if len(names) != len(domain):
            raise ValueError("one coordinate name per dimension")
        object.__setattr__(self, "names", names)

    @property
    def dimension(self) -> int:
        return self.domain.shape[0]

    @property
    def inner(self) -> np.ndarray:
        """The margin-shrunk box, shape ``(n, 2)``."""
        return np.stack([self.domain[:, 0] + self.margins, self.domain[:, 1] - self.margins], axis=1)

    def contains(self, X, shrunk: bool = False) -> np.ndarray:
        box = self.inner if shrunk else self.domain
        X = np.asarray(X, dtype=float)
        return np.all((X >= box[:, 0]) & (X <= box[:, 1]), axis=-1)

    def require(self, X, what: str = "point") -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dimension:
            raise ValueError(f"{what} has dimension {X.shape[-1]}, chart has {self.dimension}")
        if not np.all(self.contains(X)):
            bad = X.reshape(-1, self.dimension)[~self.contains(X).reshape(-1)][0]
            raise DomainError(f"{what} {bad.tolist()} lies outside the chart domain")
        return X

    def with_fd(self, fd: FDPolicy) -> "Chart":
        return replace(self, fd=fd)


@dataclass(frozen=True)
class ChartField:
    """A differentiable map from chart points to tensors.

    `grad`, when given, returns analytic derivatives with the derivative
    index first: shape ``(..., n, *shape)``.  `nested` marks evaluators that
    difference other fields internally; they are differentiated with the
    policy's larger nested step.
    """

    func: Callable[[np.ndarray], np.ndarray]
    shape: tuple[int, ...]
    chart: Optional[Chart] = None
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    nested: bool = False
    indices: str = ""

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.asarray(self.func(X), dtype=float)
        expected = X.shape[:-1] + tuple(self.shape)
        if out.shape != expected:
            try:
                out = np.broadcast_to(out, expected).copy()
            except ValueError:
                raise ValueError(f"field returned shape {out.shape}, declared {expected}") from None
        return out


def _steps(X: np.ndarray, h0: float) -> np.ndarray:
    return h0 * np.maximum(1.0, np.abs(X))


def _central(fld: ChartField, X: np.ndarray, h: np.ndarray, chart: Optional[Chart]) -> np.ndarray:
    """Central differences in every direction at once; shape ``(..., n, *shape)``."""
    n = X.shape[-1]
    eye = np.eye(n)
    offsets = eye * h[..., None, :]  # (..., n, n): row mu is the displacement along mu
    plus = X[..., None, :] + offsets
    minus = X[..., None, :] - offsets
    stencil = np.stack([plus, minus], axis=-2)  # (..., n, 2, n)
    if chart is not None and not np.all(chart.contains(stencil)):
        raise StencilOutOfDomain("finite-difference stencil leaves the chart domain")
    values = fld(stencil)  # (..., n, 2, *shape)
    if not np.all(np.isfinite(values)):
        raise NonFiniteEvaluation("field produced non-finite values on the stencil")
    axis = -(len(fld.shape) + 1)
    diff = np.take(values, 0, axis=axis) - np.take(values, 1, axis=axis)
    width = np.diagonal(plus - minus, axis1=-2, axis2=-1)  # representable 2h per direction
    denom = width.reshape(width.shape + (1,) * len(fld.shape))
    return diff / denom


def gradient(fld: ChartField, X, policy: Optional[FDPolicy] = None) -> np.ndarray:
    """All first partial derivatives; derivative index first after the batch axes."""
    X = np.asarray(X, dtype=float)
    if fld.grad is not None:
        return np.asarray(fld.grad(X), dtype=float)
    chart = fld.chart
    if policy is None:
        policy = chart.fd if chart is not None else default_policy(richardson=False)
    h0 = policy.nested_h0 if fld.nested else policy.h0
    h = _steps(X, h0)
    coarse = _central(fld, X, h, chart)
    if not policy.richardson:
        return coarse
    fine = _central(fld, X, 0.5 * h, chart)
    return (4.0 * fine - coarse) / 3.0


def differentiate(fld: ChartField, point, direction: int, policy: Optional[FDPolicy] = None) -> np.ndarray:
    """Partial derivative of `fld` along coordinate `direction` at `point`."""
    point = np.asarray(point, dtype=float)
    n = point.shape[-1]
    if not 0 <= direction < n:
        raise IndexError(f"direction {direction} out of range for dimension {n}")
    return np.take(gradient(fld, point, policy), direction, axis=-(len(fld.shape) + 1))


def sample_points(chart: Chart, count: int, seed: int = 0) -> np.ndarray:
    """`count` points in the margin-shrunk box: scrambled Halton points mixed with uniform draws."""
    if count < 1:
        raise ValueError("count must be positive")
    n = chart.dimension
    n_qmc = (count + 1) // 2
    halton = qmc.Halton(d=n, scramble=True, seed=seed).random(n_qmc)
    uniform = np.random.default_rng(seed).random((count - n_qmc, n))
    unit = np.concatenate([halton, uniform], axis=0)
    box = chart.inner
    return box[:, 0] + unit * (box[:, 1] - box[:, 0])
