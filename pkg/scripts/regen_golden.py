"""Regenerate the CLI golden reports under tests/golden/."""
from pathlib import Path

from deformed_transport.cli import dumps, run

ROOT = Path(__file__).resolve().parents[1]
CURVES = ROOT / "scripts" / "curves"

CASES = {
    "curvature_flat": ["curvature", "--manifold", "euclidean-2", "--point", "0,0"],
    "curvature_sphere": ["curvature", "--manifold", "sphere2", "--point", "1.0472,1.0"],
    "verify_flat": ["verify", "--manifold", "euclidean-3", "--samples", "5", "--seed", "2"],
    "transport_loop": ["transport", "--manifold", "sphere2", "--curve", str(CURVES / "sphere_loop.json"), "--steps", "200"],
}


def main():
    out = ROOT / "tests" / "golden"
    out.mkdir(parents=True, exist_ok=True)
    for name, argv in CASES.items():
        outcome = run(argv)
        if outcome.code != 0:
            raise SystemExit(f"{name}: exit {outcome.code}: {outcome.message}")
        (out / f"{name}.json").write_text(dumps(outcome.report), encoding="utf-8")
        print("wrote", name)


if __name__ == "__main__":
    main()
