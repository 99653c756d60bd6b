import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fpplab.cli import main


def run_cli(args, env_extra=None, capsys=None):
    """Invoke the CLI in-process; returns (exit_code, stdout)."""
    import contextlib
    import io
    import os
    saved = {}
    if env_extra:
        for k, v in env_extra.items():
            saved[k] = os.environ.get(k)
            os.environ[k] = v
    buf = io.StringIO()
    try:
        with contextlib.redirect_stdout(buf):
            code = main(args)
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v
    return code, buf.getvalue()


@pytest.fixture(scope="module")
def graph_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("gen")
    path = d / "g.json"
    code, _ = run_cli(["gen", "--width", "16", "--height", "12",
                       "--seed", "3", "--out", str(path), "--json"])
    assert code == 0
    return path


class TestGen:
    def test_deterministic_output(self, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        for p in (p1, p2):
            code, _ = run_cli(["gen", "--width", "12", "--height", "10",
                               "--seed", "5", "--out", str(p)])
            assert code == 0
        h1 = hashlib.sha256(p1.read_bytes()).hexdigest()
        h2 = hashlib.sha256(p2.read_bytes()).hexdigest()
        assert h1 == h2

    def test_summary_hole_property(self, tmp_path):
        p = tmp_path / "g.json"
        code, out = run_cli(["gen", "--width", "12", "--height", "10",
                             "--seed", "8", "--out", str(p), "--json"])
        assert code == 0
        doc = json.loads(out)
        assert doc["max_empty_radius"] < 1.0
        assert doc["hole_property"] is True

    def test_delta_g_zero_rejected(self, tmp_path):
        code, _ = run_cli(["gen", "--width", "10", "--height", "10",
                           "--seed", "1", "--delta-g", "0",
                           "--out", str(tmp_path / "x.json")])
        assert code == 2

    def test_bad_flags_exit_2(self, tmp_path):
        code, _ = run_cli(["gen", "--width", "-5", "--height", "10",
                           "--seed", "1", "--out", str(tmp_path / "x.json")])
        assert code == 2
        code = main(["gen", "--width", "10"])  # missing required flags
        assert code == 2


class TestGeodesic:
    def test_same_point_zero(self, graph_file):
        code, out = run_cli(["geodesic", "--graph", str(graph_file),
                             "--speed", "exp:1", "--seed", "2",
                             "--from", "8,6", "--to", "8,6"])
        assert code == 0
        doc = json.loads(out)
        assert doc["T"] == 0.0

    def test_swap_symmetric(self, graph_file):
        code1, out1 = run_cli(["geodesic", "--graph", str(graph_file),
                               "--seed", "2", "--from", "3,3", "--to", "13,9"])
        code2, out2 = run_cli(["geodesic", "--graph", str(graph_file),
                               "--seed", "2", "--from", "13,9", "--to", "3,3"])
        assert code1 == code2 == 0
        assert json.loads(out1)["T"] == json.loads(out2)["T"]

    def test_resummed_path_matches(self, graph_file):
        code, out = run_cli(["geodesic", "--graph", str(graph_file),
                             "--seed", "2", "--from", "3,3", "--to", "13,9"])
        assert code == 0
        doc = json.loads(out)
        from fpplab.geom import graph_from_json
        from fpplab.fpp import sample_speeds
        g = graph_from_json(graph_file.read_text())
        sp = sample_speeds(g, "exp:1", seed=2)
        lookup = {(int(i), int(j)): t
                  for (i, j), t in zip(g.edges, sp.edge_time)}
        total = 0.0
        path = doc["path"]
        for a, b in zip(path[:-1], path[1:]):
            total += lookup[(min(a, b), max(a, b))]
        assert abs(total - doc["T"]) <= 1e-9 * max(1.0, doc["T"])

    def test_out_of_window_exit_4(self, graph_file):
        code, _ = run_cli(["geodesic", "--graph", str(graph_file),
                           "--seed", "2", "--from", "1000,1000",
                           "--to", "3,3"])
        assert code == 4


class TestExperimentCommand:
    def test_jobs_invariance_and_rerun(self, tmp_path):
        cfg = {
            "schema": "fpplab-config/1", "kind": "hmu", "base_seed": 4,
            "replicas": 20, "r_grid": [8.0, 16.0, 24.0, 32.0],
            "window_policy": {"name": "k_delta", "mult": 4.0,
                              "min_half_width": 12.0,
                              "pilot_sigma0": 1.0, "pilot_chi": 0.3333},
        }
        cpath = tmp_path / "cfg.json"
        cpath.write_text(json.dumps(cfg))
        outs = []
        for name, jobs in (("o1", "1"), ("o2", "2"), ("o3", "1")):
            code, _ = run_cli(["experiment", "--config", str(cpath),
                               "--jobs", jobs, "--out", str(tmp_path / name)])
            assert code == 0
            outs.append((tmp_path / name / "hmu.csv").read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_schema_mismatch_exit_2(self, tmp_path):
        cpath = tmp_path / "bad.json"
        cpath.write_text(json.dumps({"schema": "other/1", "kind": "hmu"}))
        code, _ = run_cli(["experiment", "--config", str(cpath),
                           "--out", str(tmp_path / "o")])
        assert code == 2

    def test_env_seed_override(self, tmp_path):
        cfg = {
            "schema": "fpplab-config/1", "kind": "density", "base_seed": 4,
            "replicas": 3, "density_r": [4.0], "a_grid": [0.5, 1.0, 1.5],
        }
        cpath = tmp_path / "cfg.json"
        cpath.write_text(json.dumps(cfg))
        code, _ = run_cli(["experiment", "--config", str(cpath),
                           "--out", str(tmp_path / "e1")],
                          env_extra={"FPPLAB_SEED": "99"})
        assert code == 0
        man = json.loads((tmp_path / "e1" / "manifest.json").read_text())
        assert man["config"]["base_seed"] == 99


class TestVerifyCommand:
    def test_verify_generated_graph(self, graph_file):
        code, out = run_cli(["verify", "--graph", str(graph_file),
                             "--pairs", "40", "--json"])
        assert code == 0
        doc = json.loads(out)
        assert doc["pass"] is True
        assert doc["checks"]["hole"]["max_empty_radius"] < 1.0
        assert doc["checks"]["separation"]["pass"]
        assert doc["checks"]["dilation"]["hop_failures"] == 0


class TestEnvelopeCommand:
    def test_envelope_from_sigma_fixture(self, tmp_path):
        from fpplab.scaling import SigmaCurve
        rs = np.geomspace(5.0, 500.0, 30)
        curve = SigmaCurve(r=rs, sigma=rs ** (1 / 3), stderr=np.zeros(30),
                           n=np.full(30, 50))
        cpath = tmp_path / "sigma.json"
        cpath.write_text(curve.to_json())
        opath = tmp_path / "env.json"
        code, out = run_cli(["envelope", "--curve", str(cpath),
                             "--chi", "0.33", "--epsilon", "0.05",
                             "--out", str(opath), "--check"])
        assert code == 0
        doc = json.loads(out)
        assert doc["max_slope"] <= 0.05
        assert doc["violations"] == 0
        assert opath.exists()

    def test_envelope_bad_M(self, tmp_path):
        from fpplab.scaling import SigmaCurve
        rs = np.array([5.0, 20.0, 21.0, 200.0])
        curve = SigmaCurve(r=rs, sigma=np.array([1.0, 1.1, 9.0, 10.0]),
                           stderr=np.zeros(4), n=np.full(4, 50))
        cpath = tmp_path / "sigma.json"
        cpath.write_text(curve.to_json())
        code, _ = run_cli(["envelope", "--curve", str(cpath), "--chi", "0.33",
                           "--epsilon", "0.001", "--block-base", "1.0"])
        assert code == 2


class TestSubprocessEntry:
    def test_module_invocation(self, tmp_path):
        # true end-to-end: separate interpreter, console behavior
        out = tmp_path / "g.json"
        proc = subprocess.run(
            [sys.executable, "-m", "fpplab.cli", "gen", "--width", "10",
             "--height", "10", "--seed", "2", "--out", str(out)],
            capture_output=True, text=True, timeout=600)
        assert proc.returncode == 0
        assert out.exists()
        assert "vertices" in proc.stdout
