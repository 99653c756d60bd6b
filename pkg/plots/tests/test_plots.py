import json
import math
from pathlib import Path

import numpy as np
import pytest

from fpplab_plot.cli import main
from fpplab_plot.figures import _d_r_field, _sigma_curve, read_csv


TAIL_HEADER = "r,abscissa,n,k,p,wilson_lo,wilson_hi,p_isotonic"


def write_sigma_csv(path, chi=1.0 / 3.0):
    rows = ["r,n,censored,h_mean,h_stderr,sigma,sigma_stderr,delta,mu_lo,"
            "mu_hi,nonrandom_error,nonrandom_stderr,error_over_sigma,"
            "wander_median"]
    for r in (10.0, 20.0, 40.0, 80.0, 160.0, 320.0):
        sig = r ** chi
        rows.append(f"{r},100,0,{0.22 * r},{0.01},{sig},{0.01 * sig},"
                    f"{math.sqrt(r * sig)},0.21,0.22,{0.5 * sig},0.02,0.5,"
                    f"{math.sqrt(r * sig)}")
    Path(path).write_text("\n".join(rows) + "\n")


def write_tail_csv(path, rs=(50.0, 100.0)):
    rows = [TAIL_HEADER]
    for r in rs:
        p = 1.0
        for i, s in enumerate((0.5, 1.0, 1.5, 2.0, 2.5)):
            p = max(0.0, p * 0.45)
            lo, hi = max(0.0, p - 0.05), min(1.0, p + 0.05)
            rows.append(f"{r},{s},200,{int(200 * p)},{p},{lo},{hi},{p}")
    Path(path).write_text("\n".join(rows) + "\n")


def write_tube_fixtures(d):
    sites = [[float(x), 0.8 * math.sin(x / 7.0)] for x in range(0, 61, 2)]
    graph = {"schema": "fpplab-graph/1", "sites": sites,
             "edges": [[i, i + 1, 0, 2.0] for i in range(len(sites) - 1)],
             "delta_g": 0.2, "seed_chain": [1],
             "window": {"lo": [0, -10], "hi": [60, 10], "margin": 7}}
    geod = {"x": [0.0, 0.0], "y": [60.0, 0.0], "T": 13.0,
            "path": list(range(len(sites))), "wandering": 0.8,
            "censored": False}
    rs = np.geomspace(5.0, 200.0, 20)
    sigma = {"schema": "fpplab-sigma-curve/1", "r": list(rs),
             "sigma": list(rs ** (1 / 3)), "stderr": [0.0] * 20,
             "n": [50] * 20}
    (d / "graph.json").write_text(json.dumps(graph))
    (d / "geod.json").write_text(json.dumps(geod))
    (d / "sigma.json").write_text(json.dumps(sigma))


class TestSigmaFigure:
    def test_annotation_reads_exponent(self, tmp_path):
        csvp = tmp_path / "hmu.csv"
        write_sigma_csv(csvp, chi=1.0 / 3.0)
        out = tmp_path / "sigma.png"
        assert main(["sigma", "--in", str(csvp), "--out", str(out)]) == 0
        svg = (tmp_path / "sigma.svg").read_text()
        assert "0.333" in svg

    def test_byte_identical_rerun(self, tmp_path):
        csvp = tmp_path / "hmu.csv"
        write_sigma_csv(csvp)
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        assert main(["sigma", "--in", str(csvp), "--out", str(a)]) == 0
        assert main(["sigma", "--in", str(csvp), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_missing_column_fails(self, tmp_path):
        csvp = tmp_path / "bad.csv"
        csvp.write_text("r,wrong\n1,2\n")
        out = tmp_path / "x.png"
        assert main(["sigma", "--in", str(csvp), "--out", str(out)]) != 0
        assert not out.exists()


class TestTailFigures:
    @pytest.mark.parametrize("kind", ["fluctuation", "wandering",
                                      "straightness", "density"])
    def test_kinds_render_and_rerun_identical(self, tmp_path, kind):
        csvp = tmp_path / "tail.csv"
        write_tail_csv(csvp)
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        assert main(["tails", "--kind", kind, "--in", str(csvp),
                     "--out", str(a)]) == 0
        assert main(["tails", "--kind", kind, "--in", str(csvp),
                     "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_column_fails(self, tmp_path):
        csvp = tmp_path / "tail.csv"
        csvp.write_text("abscissa,p\n1,0.5\n")
        assert main(["tails", "--kind", "density", "--in", str(csvp),
                     "--out", str(tmp_path / "x.png")]) != 0


class TestTubeFigure:
    def test_renders_and_rerun_identical(self, tmp_path):
        write_tube_fixtures(tmp_path)
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        args = ["tube", "--graph", str(tmp_path / "graph.json"),
                "--geodesic", str(tmp_path / "geod.json"),
                "--sigma", str(tmp_path / "sigma.json")]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_key_fails(self, tmp_path):
        write_tube_fixtures(tmp_path)
        (tmp_path / "geod.json").write_text(json.dumps({"x": [0, 0]}))
        args = ["tube", "--graph", str(tmp_path / "graph.json"),
                "--geodesic", str(tmp_path / "geod.json"),
                "--sigma", str(tmp_path / "sigma.json"),
                "--out", str(tmp_path / "x.png")]
        assert main(args) != 0

    def test_field_levels_nested_and_symmetric(self, tmp_path):
        write_tube_fixtures(tmp_path)
        sdoc = json.loads((tmp_path / "sigma.json").read_text())
        sigma, _ = _sigma_curve(sdoc)
        r = 60.0
        xs = np.linspace(-10, r + 10, 121)
        ys = np.linspace(-20, 20, 81)
        xx, yy = np.meshgrid(xs, ys)
        field = _d_r_field(xx, yy, r, sigma, 1.5, 0.45,
                           np.asarray(sdoc["r"], dtype=float))
        m1 = field <= 0.5
        m2 = field <= 1.0
        assert np.all(m2[m1])  # nested level sets
        # reflection symmetry about r/2: mirror the x grid
        field_m = _d_r_field(r - xx, yy, r, sigma, 1.5, 0.45,
                             np.asarray(sdoc["r"], dtype=float))
        assert np.allclose(field, field_m, rtol=1e-9, atol=1e-12)
        # a straight near-axis geodesic stays in the c = 1 level set
        axis = _d_r_field(np.linspace(0, r, 50)[None, :],
                          0.8 * np.ones((1, 50)), r, sigma, 1.5, 0.45,
                          np.asarray(sdoc["r"], dtype=float))
        assert np.all(axis <= 1.0)


class TestCsvReader:
    def test_read_roundtrip(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("a,b\n1.5,2\n3,4\n")
        cols = read_csv(p)
        assert np.allclose(cols["a"], [1.5, 3.0])
