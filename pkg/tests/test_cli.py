import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from deformed_transport.cli import EXIT_CONFIG, EXIT_CURVE, EXIT_DOMAIN, EXIT_FAILED, EXIT_OK, dumps, main, run

ROOT = Path(__file__).resolve().parents[1]
CURVES = ROOT / "scripts" / "curves"
GOLDEN = ROOT / "tests" / "golden"
sys.path.insert(0, str(ROOT / "scripts"))
from regen_golden import CASES  # noqa: E402


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_reports(name):
    outcome = run(CASES[name])
    assert outcome.code == EXIT_OK
    assert dumps(outcome.report) == (GOLDEN / f"{name}.json").read_text(encoding="utf-8")


def test_byte_stable_across_processes(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        cmd = [sys.executable, "-m", "deformed_transport.cli", "verify", "--manifold", "polar2", "--samples", "4", "--seed", "9", "--out", str(path)]
        assert subprocess.run(cmd, capture_output=True).returncode == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_emitter_format():
    text = dumps({"b": [1.0, -0.0, float("nan")], "a": True, "c": 0.1})
    assert text == '{"a": true, "b": [1, 0, null], "c": 0.10000000000000001}\n'
    assert json.loads(text)["c"] == 0.1


def test_curvature_values():
    flat = run(["curvature", "--manifold", "euclidean-2", "--point", "0,0"]).report
    p = flat["points"][0]
    for key in ("christoffel", "riemann", "riemann_frame", "anholonomity", "structure_functions"):
        assert np.all(np.asarray(p[key]) == 0)
    sph = run(["curvature", "--manifold", "sphere2", "--point", "1.0472,1.0"]).report["points"][0]
    assert sph["riemann"][0][1][0][1] == pytest.approx(0.75, abs=1e-4)
    hyp = run(["curvature", "--manifold", "hyperbolic2", "--point", "1,2"]).report["points"][0]
    assert hyp["riemann"][0][1][0][1] == pytest.approx(-0.25, abs=1e-6)


def test_transport_reports():
    loop = run(["transport", "--manifold", "sphere2", "--curve", str(CURVES / "sphere_loop.json")]).report
    assert loop["rotation_angle"] == pytest.approx(1.2 * math.cos(0.5), abs=2e-3)
    flat = run(["transport", "--manifold", "euclidean-2", "--curve", str(CURVES / "flat_square.json")]).report
    assert abs(flat["rotation_angle"]) < 1e-8
    eq = run(["transport", "--manifold", "sphere2", "--curve", str(CURVES / "sphere_equator.json"), "--vector", "0,1"]).report
    assert eq["norm_drift"] < 1e-8 and "holonomy" not in eq


def test_verify_exit_codes():
    assert run(["verify", "--manifold", "euclidean-3", "--samples", "3"]).code == EXIT_OK
    failed = run(["verify", "--manifold", "sphere2", "--samples", "3", "--tol", "maurer-cartan=1e-15"])
    assert failed.code == EXIT_FAILED and failed.report["failed"] == ["maurer-cartan"]
    assert "maurer-cartan" in failed.message


def test_asymmetric_spec_is_config_error(tmp_path):
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps({"dimension": 2, "domain": [[0, 1], [0, 1]], "metric": [["1", "x0"], ["0", "1"]]}))
    outcome = run(["verify", "--spec", str(spec)])
    assert outcome.code == EXIT_CONFIG
    assert "metric[0][1]" in outcome.message and "metric[1][0]" in outcome.message


@pytest.mark.parametrize(
    "argv",
    [
        ["curvature"],
        ["curvature", "--manifold", "sphere2", "--spec", "x.json"],
        ["curvature", "--manifold", "klein"],
        ["curvature", "--manifold", "sphere2", "--point", "1,a"],
        ["curvature", "--manifold", "sphere2", "--point", "1,2,3"],
        ["verify", "--manifold", "sphere2", "--tol", "metricity=-1"],
        ["verify", "--manifold", "sphere2", "--tol", "bogus=1"],
        ["verify", "--manifold", "sphere2", "--samples", "0"],
        ["transport", "--manifold", "sphere2"],
        ["explode", "--manifold", "sphere2"],
    ],
)
def test_config_errors(argv):
    assert run(argv).code == EXIT_CONFIG


def test_domain_error():
    assert run(["curvature", "--manifold", "sphere2", "--point", "0,1"]).code == EXIT_DOMAIN


def test_curve_errors(tmp_path):
    open_loop = tmp_path / "open.json"
    open_loop.write_text(json.dumps({"holonomy": True, "segments": [{"coords": ["1", "1 + s"]}]}))
    assert run(["transport", "--manifold", "sphere2", "--curve", str(open_loop)]).code == EXIT_CURVE
    for bad in (
        {"segments": []},
        {"segments": [{"coords": ["1"]}]},
        {"segments": [{"coords": ["1", "s +"]}]},
        {"segments": [{"coords": ["1", "s"], "weight": -1}]},
        {"segments": [{"coords": ["1", "s"]}], "colour": "red"},
    ):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        assert run(["transport", "--manifold", "sphere2", "--curve", str(path)]).code == EXIT_CURVE
    assert run(["transport", "--manifold", "sphere2", "--curve", str(tmp_path / "missing.json")]).code == EXIT_CURVE
    leaving = tmp_path / "leave.json"
    leaving.write_text(json.dumps({"segments": [{"coords": ["1 + 3*s", "1"]}]}))
    assert run(["transport", "--manifold", "sphere2", "--curve", str(leaving)]).code == EXIT_DOMAIN


def test_main_writes_stdout(capsys):
    assert main(["curvature", "--manifold", "euclidean-2", "--point", "0,0"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["manifold"] == "euclidean-2"


def test_console_script_exit_code():
    proc = subprocess.run(["deformed-transport", "curvature", "--manifold", "nowhere"], capture_output=True, text=True)
    assert proc.returncode == EXIT_CONFIG and "unknown manifold" in proc.stderr
