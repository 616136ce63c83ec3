"""Built-in manifolds and the JSON manifold-spec format.

A spec file looks like::

    {"dimension": 2, "coordinates": ["x0", "x1"],
     "domain": [[0.1, 3.04], [0.1, 6.18]], "margins": [0.003, 0.006],
     "metric": [["1", "0"], ["0", "sin(x0)^2"]]}

`margins` is optional.  Every metric entry is an expression in the
coordinate names; the matrix must be written out in full and is checked
for symmetry rather than symmetrised.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .expression import Expression, compile_expression, parse_expression, to_source
from .fields import Chart, ChartField, FDPolicy, sample_points
from .levi_civita import MetricField

__all__ = ["ConfigError", "Manifold", "CATALOG", "catalog_manifold", "manifold_from_spec", "load_spec"]


class ConfigError(ValueError):
    """Malformed user input (spec files, curve files, CLI values)."""


@dataclass(frozen=True)
class Manifold:
    name: str
    chart: Chart
    metric_source: tuple[tuple[str, ...], ...]
    exprs: tuple[tuple[Expression, ...], ...]

    @property
    def dimension(self) -> int:
        return self.chart.dimension

    @cached_property
    def metric(self) -> MetricField:
        n = self.dimension
        funcs = [[compile_expression(e, self.chart.names) for e in row] for row in self.exprs]

        def g(X):
            X = np.asarray(X, dtype=float)
            out = np.empty(X.shape[:-1] + (n, n))
            for i in range(n):
                for j in range(n):
                    out[..., i, j] = funcs[i][j](X)
            return out

        return MetricField(ChartField(g, (n, n), self.chart, indices="_mu_nu"))

    def with_fd(self, fd: FDPolicy) -> "Manifold":
        return Manifold(self.name, self.chart.with_fd(fd), self.metric_source, self.exprs)

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        return sample_points(self.chart, count, seed)


def _build(name, sources, domain, names=None, margins=None) -> Manifold:
    n = len(domain)
    names = tuple(names) if names else tuple(f"x{i}" for i in range(n))
    if len(sources) != n or any(len(row) != n for row in sources):
        raise ConfigError(f"metric must be a full {n}x{n} matrix")
    exprs = []
    for i, row in enumerate(sources):
        parsed = []
        for j, src in enumerate(row):
            if not isinstance(src, str):
                raise ConfigError(f"metric[{i}][{j}] must be an expression string")
            try:
                parsed.append(parse_expression(src, names))
            except ValueError as exc:
                raise ConfigError(f"metric[{i}][{j}]: {exc}") from None
        exprs.append(tuple(parsed))
    try:
        chart = Chart(np.array(domain, dtype=float), None if margins is None else np.array(margins, dtype=float), names=names)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    m = Manifold(name, chart, tuple(tuple(r) for r in sources), tuple(exprs))
    _check_symmetric(m)
    return m


def _check_symmetric(m: Manifold) -> None:
    n = m.dimension
    bad = []
    X = sample_points(m.chart, 16, seed=12345)
    for i in range(n):
        for j in range(i + 1, n):
            if m.exprs[i][j] == m.exprs[j][i]:
                continue
            try:
                a = compile_expression(m.exprs[i][j], m.chart.names)(X)
                b = compile_expression(m.exprs[j][i], m.chart.names)(X)
            except ValueError:
                a, b = np.nan, 0.0
            if not np.array_equal(a, b):
                bad.append((i, j))
    if bad:
        pairs = ", ".join(
            f"metric[{i}][{j}]={to_source(m.exprs[i][j])} vs metric[{j}][{i}]={to_source(m.exprs[j][i])}" for i, j in bad
        )
        raise ConfigError(f"metric is not symmetric: {pairs}")


def _euclidean(n: int) -> Manifold:
    rows = [["1" if i == j else "0" for j in range(n)] for i in range(n)]
    return _build(f"euclidean-{n}", rows, [[-1.0, 1.0]] * n)


CATALOG = {
    "sphere2": lambda: _build(
        "sphere2", [["1", "0"], ["0", "sin(x0)^2"]], [[0.1, math.pi - 0.1], [0.1, 2 * math.pi - 0.1]]
    ),
    "hyperbolic2": lambda: _build(
        "hyperbolic2", [["1/(x1*x1)", "0"], ["0", "1/(x1*x1)"]], [[-2.0, 2.0], [0.5, 5.0]]
    ),
    "polar2": lambda: _build("polar2", [["1", "0"], ["0", "x0^2"]], [[0.5, 3.0], [0.1, 2 * math.pi - 0.1]]),
}
"""Catalog entries.  Coordinates are ``(x0, x1)``:

* ``sphere2``: unit sphere, ``(theta, phi)``;
* ``hyperbolic2``: Poincare half-plane, ``(x, y)`` with ``y in [0.5, 5]``;
* ``polar2``: flat plane, ``(r, phi)``;
* ``euclidean-N``: identity metric on ``[-1, 1]^N``.
"""


def catalog_manifold(name: str) -> Manifold:
    m = re.fullmatch(r"euclidean-(\d+)", name)
    if m:
        n = int(m.group(1))
        if n < 1:
            raise ConfigError("euclidean dimension must be positive")
        return _euclidean(n)
    if name not in CATALOG:
        raise ConfigError(f"unknown manifold {name!r}; choose from euclidean-N, {', '.join(sorted(CATALOG))}")
    return CATALOG[name]()


_SPEC_KEYS = {"dimension", "coordinates", "domain", "margins", "metric"}


def manifold_from_spec(spec: dict, name: str = "spec") -> Manifold:
    if not isinstance(spec, dict):
        raise ConfigError("manifold spec must be a JSON object")
    unknown = set(spec) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in manifold spec: {sorted(unknown)}")
    missing = {"dimension", "domain", "metric"} - set(spec)
    if missing:
        raise ConfigError(f"missing keys in manifold spec: {sorted(missing)}")
    n = spec["dimension"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError("dimension must be a positive integer")
    names: Optional[Sequence[str]] = spec.get("coordinates")
    if names is not None:
        if len(names) != n or len(set(names)) != n or not all(isinstance(s, str) and s.isidentifier() for s in names):
            raise ConfigError("coordinates must be n distinct identifiers")
    domain = spec["domain"]
    try:
        domain_arr = np.array(domain, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("domain must be a list of [lo, hi] pairs") from None
    if domain_arr.shape != (n, 2) or np.any(domain_arr[:, 1] <= domain_arr[:, 0]):
        raise ConfigError("domain must hold one increasing [lo, hi] pair per coordinate")
    margins = spec.get("margins")
    if margins is not None and (len(margins) != n):
        raise ConfigError("margins must hold one value per coordinate")
    metric = spec["metric"]
    if not isinstance(metric, list) or len(metric) != n or any(not isinstance(r, list) or len(r) != n for r in metric):
        raise ConfigError(f"metric must be a full {n}x{n} matrix")
    return _build(name, metric, domain, names, margins)


def load_spec(path) -> Manifold:
    path = Path(path)
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifold spec {path}: {exc}") from None
    return manifold_from_spec(spec, name=path.stem)
