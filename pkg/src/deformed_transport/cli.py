"""``deformed-transport`` command line.

Exit codes: 0 success, 1 an identity failed, 2 bad configuration,
3 a point or stencil left the chart, 4 bad curve.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .deformed_group import deformation_for
from .dt_group import frame_commutator_coefficients
from .expression import ExpressionError, compile_expression, parse_expression
from .fields import DomainError, GeometryError
from .levi_civita import anholonomity, christoffel, riemann, to_frame
from .manifolds import ConfigError, Manifold, catalog_manifold, load_spec
from .transport import Curve, CurveError, Segment, curve_length, holonomy, rotation_angle, transport_operator
from .verify import DEFAULT_TOLERANCES, run_suite

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DOMAIN, EXIT_CURVE = 0, 1, 2, 3, 4
COMMANDS = ("curvature", "transport", "verify")


@dataclass
class RunConfig:
    command: str
    manifold: Optional[str] = None
    spec: Optional[Path] = None
    points: list = field(default_factory=list)
    curve: Optional[Path] = None
    vector: Optional[list] = None
    samples: Optional[int] = None
    seed: int = 0
    steps: int = 1000
    tolerances: dict = field(default_factory=dict)
    out: Optional[Path] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if (self.manifold is None) == (self.spec is None):
            raise ConfigError("give exactly one of --manifold and --spec")
        if self.samples is not None and self.samples < 1:
            raise ConfigError("--samples must be positive")
        if self.seed < 0:
            raise ConfigError("--seed must be non-negative")
        if self.steps < 1:
            raise ConfigError("--steps must be positive")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}; known: {sorted(DEFAULT_TOLERANCES)}")
        for key, val in self.tolerances.items():
            if not (isinstance(val, float) and math.isfinite(val) and val > 0):
                raise ConfigError(f"tolerance {key} must be a positive real")
        if self.command == "transport" and self.curve is None:
            raise ConfigError("transport needs --curve")

    def load_manifold(self) -> Manifold:
        return catalog_manifold(self.manifold) if self.manifold is not None else load_spec(self.spec)


# -- JSON ----------------------------------------------------------------

def _emit(obj) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits, NaN/inf as null, signed zero as 0."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return "null"
        return "0" if v == 0 else format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _emit(obj.tolist())
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_emit(obj[k])}" for k in sorted(obj)) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_emit(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return _emit(obj) + "\n"


# -- parsing helpers ------------------------------------------------------

def _csv_floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(p) for p in text.split(",")]
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{what} must be finite")
    return vals


def _tolerance(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep:
        raise ConfigError(f"--tol expects KEY=VAL, got {text!r}")
    try:
        num = float(val)
    except ValueError:
        raise ConfigError(f"tolerance {key} must be a positive real, got {val!r}") from None
    return key.strip(), num


_CURVE_KEYS = {"segments", "holonomy"}
_SEGMENT_KEYS = {"coords", "weight"}


def curve_from_spec(spec, dimension: int) -> tuple[Curve, bool]:
    """Build a curve from ``{"segments": [{"coords": [...], "weight": w}], "holonomy": bool}``.

    Each coordinate is an expression in the curve parameter ``s`` over ``[0, 1]``.
    """
    if not isinstance(spec, dict):
        raise CurveError("curve file must hold a JSON object")
    unknown = set(spec) - _CURVE_KEYS
    if unknown:
        raise CurveError(f"unknown keys in curve file: {sorted(unknown)}")
    segs = spec.get("segments")
    if not isinstance(segs, list) or not segs:
        raise CurveError("curve needs a non-empty 'segments' list")
    want_holonomy = spec.get("holonomy", False)
    if not isinstance(want_holonomy, bool):
        raise CurveError("'holonomy' must be true or false")
    out = []
    for i, seg in enumerate(segs):
        if not isinstance(seg, dict) or set(seg) - _SEGMENT_KEYS or "coords" not in seg:
            raise CurveError(f"segment {i} must be an object with 'coords' and optional 'weight'")
        coords = seg["coords"]
        if not isinstance(coords, list) or len(coords) != dimension or not all(isinstance(c, str) for c in coords):
            raise CurveError(f"segment {i} needs {dimension} coordinate expressions")
        weight = seg.get("weight", 1.0)
        if isinstance(weight, bool) or not isinstance(weight, (int, float)) or not weight > 0:
            raise CurveError(f"segment {i} weight must be a positive number")
        try:
            funcs = [compile_expression(parse_expression(c, ("s",)), ("s",)) for c in coords]
        except ExpressionError as exc:
            raise CurveError(f"segment {i}: {exc}") from None

        def position(s, funcs=funcs):
            S = np.asarray(s, dtype=float)[..., None]
            return np.stack([f(S) for f in funcs], axis=-1)

        out.append(Segment(position, None, float(weight)))
    return Curve(tuple(out)), want_holonomy


def load_curve(path, dimension: int) -> tuple[Curve, bool]:
    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CurveError(f"cannot read curve file {path}: {exc}") from None
    return curve_from_spec(spec, dimension)


# -- commands -------------------------------------------------------------

def _points(cfg: RunConfig, m: Manifold) -> np.ndarray:
    if cfg.points:
        pts = np.array(cfg.points, dtype=float)
        if pts.shape[-1] != m.dimension:
            raise ConfigError(f"--point needs {m.dimension} coordinates")
        return m.chart.require(pts, "point")
    if cfg.samples is not None:
        return m.sample(cfg.samples, cfg.seed)
    return m.chart.domain.mean(axis=1)[None, :]


def _header(cfg: RunConfig, m: Manifold) -> dict:
    return {"command": cfg.command, "manifold": m.name, "dimension": m.dimension, "coordinates": list(m.chart.names)}


def cmd_curvature(cfg: RunConfig) -> tuple[dict, int]:
    m = cfg.load_manifold()
    X = _points(cfg, m)
    d = deformation_for(m)
    G = christoffel(m.metric, X)
    R = riemann(d.connection, X)
    h = d.frame(X)
    R_frame = to_frame(R, h, np.linalg.inv(h), upper=1)
    F_coord = anholonomity(d.frame, X)
    F_frame = frame_commutator_coefficients(d, X)
    report = _header(cfg, m)
    report["points"] = [
        {
            "x": X[i],
            "christoffel": G[i],
            "riemann": R[i],
            "riemann_frame": R_frame[i],
            "frame": h[i],
            "anholonomity": F_coord[i],
            "structure_functions": F_frame[i],
        }
        for i in range(len(X))
    ]
    report["conventions"] = {
        "christoffel": "G[mu][nu][rho] = G^mu_{nu rho}",
        "riemann": "R[mu][lam][kap][nu] = R^mu_{lam kap nu}",
        "riemann_frame": "R[m][n][k][l] in the orthonormal frame",
        "frame": "h[m][mu], coframe components",
        "anholonomity": "F[n][mu][nu] = -(d_mu h^n_nu - d_nu h^n_mu)",
        "structure_functions": "F[n][k][l] with [X_k, X_l] = F^n_kl X_n",
    }
    return report, EXIT_OK


def cmd_transport(cfg: RunConfig) -> tuple[dict, int]:
    m = cfg.load_manifold()
    curve, want_holonomy = load_curve(cfg.curve, m.dimension)
    if want_holonomy and not curve.is_closed():
        raise CurveError("holonomy requested but the curve is not closed (endpoints differ by more than 1e-12)")
    d = deformation_for(m)
    start, end = curve.start, curve.end
    m.chart.require(np.stack([start, end]), "curve endpoint")
    n = m.dimension
    if cfg.vector is None:
        v0 = d.frame_inverse(start)[:, 0]
    else:
        v0 = np.array(cfg.vector, dtype=float)
        if v0.shape != (n,):
            raise ConfigError(f"--vector needs {n} components")
    tau0 = d.frame(start) @ v0
    M = transport_operator(d, curve, cfg.steps)
    tau1 = M @ tau0
    v1 = d.frame_inverse(end) @ tau1
    length = curve_length(m.metric, curve, max(cfg.steps, 200))
    n0, n1 = float(np.linalg.norm(tau0)), float(np.linalg.norm(tau1))
    report = _header(cfg, m)
    report.update(
        {
            "steps": cfg.steps,
            "start": start,
            "end": end,
            "vector_start": v0,
            "vector_end": v1,
            "frame_vector_start": tau0,
            "frame_vector_end": tau1,
            "length": length,
            "norm_start": n0,
            "norm_end": n1,
            "norm_drift": abs(n1 - n0),
            "norm_drift_per_length": abs(n1 - n0) / length if length > 0 else 0.0,
            "closed": curve.is_closed(),
        }
    )
    if want_holonomy:
        H = holonomy(d, curve, cfg.steps)
        report["holonomy"] = H
        report["rotation_angle"] = rotation_angle(H)
    return report, EXIT_OK


def cmd_verify(cfg: RunConfig) -> tuple[dict, int]:
    m = cfg.load_manifold()
    samples = 20 if cfg.samples is None else cfg.samples
    results = run_suite(m, samples=samples, seed=cfg.seed, tolerances=cfg.tolerances)
    report = _header(cfg, m)
    report["samples"] = samples
    report["seed"] = cfg.seed
    report["checks"] = {k: r.as_dict() for k, r in results.items()}
    failed = sorted(k for k, r in results.items() if not r.passed)
    report["failed"] = failed
    report["pass"] = not failed
    return report, EXIT_OK if not failed else EXIT_FAILED


HANDLERS = {"curvature": cmd_curvature, "transport": cmd_transport, "verify": cmd_verify}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="deformed-transport", description="Curvature, parallel transport and identity checks on a chart.")
    p.add_argument("command", choices=COMMANDS)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--manifold", help="catalog name: sphere2, hyperbolic2, polar2, euclidean-N")
    src.add_argument("--spec", type=Path, help="JSON manifold spec")
    p.add_argument("--point", action="append", default=[], help="comma-separated coordinates; repeatable; use --point=-1,0 for negative values")
    p.add_argument("--curve", type=Path, help="JSON curve file")
    p.add_argument("--vector", help="comma-separated coordinate components at the curve start (default: first frame vector)")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--tol", nargs="+", action="extend", default=[], metavar="KEY=VAL")
    p.add_argument("--out", type=Path)
    return p


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    return RunConfig(
        command=ns.command,
        manifold=ns.manifold,
        spec=ns.spec,
        points=[_csv_floats(p, "--point") for p in ns.point],
        curve=ns.curve,
        vector=None if ns.vector is None else _csv_floats(ns.vector, "--vector"),
        samples=ns.samples,
        seed=ns.seed,
        steps=ns.steps,
        tolerances=dict(_tolerance(t) for t in ns.tol),
        out=ns.out,
    )


@dataclass(frozen=True)
class Outcome:
    report: Optional[dict]
    code: int
    message: str = ""
    written: bool = False


def run(argv: Optional[Sequence[str]] = None) -> Outcome:
    """Run the CLI without touching stdout or the process exit status."""
    try:
        cfg = parse_config(argv)
        report, code = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        return Outcome(None, EXIT_CONFIG, f"config error: {exc}")
    except CurveError as exc:
        return Outcome(None, EXIT_CURVE, f"curve error: {exc}")
    except (DomainError, GeometryError, ExpressionError) as exc:
        return Outcome(None, EXIT_DOMAIN, f"domain error: {exc}")
    message = "" if code == EXIT_OK else "failed identities: " + ", ".join(report["failed"])
    if cfg.out is None:
        return Outcome(report, code, message)
    try:
        cfg.out.write_text(dumps(report), encoding="utf-8")
    except OSError as exc:
        return Outcome(report, EXIT_CONFIG, f"config error: cannot write {cfg.out}: {exc}")
    return Outcome(report, code, message, written=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    outcome = run(argv)
    if outcome.report is not None and not outcome.written:
        sys.stdout.write(dumps(outcome.report))
    if outcome.message:
        print(outcome.message, file=sys.stderr)
    return outcome.code


if __name__ == "__main__":
    sys.exit(main())
