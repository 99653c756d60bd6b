"""Operator command line: graph generation, geodesic queries, experiment
suites, graph verification, and powerlike envelopes.

Exit codes: 0 success; 2 invalid flags or config schema mismatch;
3 saturation failure; 4 disconnected or out-of-window query;
5 excessive censoring.  Logs go to stderr; stdout carries results
(machine-parseable JSON under --json).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SATURATION = 3
EXIT_QUERY = 4
EXIT_CENSORING = 5


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _seed_override(seed: int | None) -> int | None:
    env = os.environ.get("FPPLAB_SEED")
    if env is not None:
        _log(f"FPPLAB_SEED={env} overrides configured seed")
        return int(env)
    return seed


def cmd_gen(args) -> int:
    from .pointproc import Window, sample_space_time, accept, verify_hole_property
    from .geom import build_graph, graph_to_json

    if args.width <= 0 or args.height <= 0:
        _log("gen: width and height must be positive")
        return EXIT_USAGE
    if not (0.0 < args.delta_g < 1.0):
        _log("gen: --delta-g must lie strictly between 0 and 1")
        return EXIT_USAGE
    seed = _seed_override(args.seed)
    win = Window((0.0, 0.0), (args.width, args.height), margin=args.margin)
    try:
        sample = sample_space_time(win, rate=args.rate, seed=seed)
        acc = accept(sample)
        if not acc.saturated:
            _log("gen: acceptance did not saturate the window")
            return EXIT_SATURATION
        graph = build_graph(acc, delta_g=args.delta_g)
    except RuntimeError as exc:
        _log(f"gen: {exc}")
        return EXIT_SATURATION
    hole = verify_hole_property(acc, trim=0.0)
    text = graph_to_json(graph)
    Path(args.out).write_text(text)
    summary = {
        "vertices": len(graph),
        "edges_delaunay": int(np.sum(graph.edge_kind == 0)),
        "edges_augmentation": int(np.sum(graph.edge_kind == 1)),
        "max_empty_radius": hole.max_empty_radius,
        "hole_property": hole.passed,
        "out": str(args.out),
    }
    print(json.dumps(summary) if args.json else
          "\n".join(f"{k}: {v}" for k, v in summary.items()))
    return EXIT_OK


def cmd_geodesic(args) -> int:
    from .geom import graph_from_json
    from .fpp import sample_speeds, passage_time, DisconnectedError

    graph = graph_from_json(Path(args.graph).read_text())
    seed = _seed_override(args.seed)
    speeds = sample_speeds(graph, args.speed, seed=seed)
    try:
        x = tuple(float(v) for v in args.frm.split(","))
        y = tuple(float(v) for v in args.to.split(","))
    except ValueError:
        _log("geodesic: --from/--to must be x,y")
        return EXIT_USAGE
    try:
        res = passage_time(graph, speeds, x, y)
    except (DisconnectedError, ValueError) as exc:
        _log(f"geodesic: {exc}")
        return EXIT_QUERY
    doc = {
        "x": list(res.x), "y": list(res.y),
        "T": res.T,
        "path": [int(v) for v in res.path],
        "wandering": res.wandering,
        "censored": res.censored,
    }
    print(json.dumps(doc))
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiments import (load_config, run_experiment,
                              ExcessiveCensoringError)

    try:
        cfg = load_config(args.config)
    except (ValueError, TypeError, KeyError) as exc:
        _log(f"experiment: bad config: {exc}")
        return EXIT_USAGE
    if os.environ.get("FPPLAB_SEED") is not None:
        cfg.base_seed = int(os.environ["FPPLAB_SEED"])
        _log(f"FPPLAB_SEED overrides base_seed -> {cfg.base_seed}")
    try:
        res = run_experiment(cfg, args.out, jobs=args.jobs)
    except ExcessiveCensoringError as exc:
        _log(f"experiment: {exc}")
        return EXIT_CENSORING
    if args.json:
        print(json.dumps({"summary": res["summary"],
                          "outputs": [str(p) for p, _ in res["outputs"]]}))
    else:
        _log(f"experiment: wrote {len(res['outputs'])} files to {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import verify_graph_file

    report = verify_graph_file(args.graph, pairs=args.pairs,
                               seed=_seed_override(args.seed) or 0)
    print(json.dumps(report, indent=None if args.json else 2))
    return EXIT_OK if report["pass"] else 1


def cmd_envelope(args) -> int:
    from .scaling import SigmaCurve, sublin_majorant, powerlike_check

    curve = SigmaCurve.from_json(Path(args.curve).read_text())
    try:
        env = sublin_majorant(curve.r, curve.sigma, chi=args.chi,
                              epsilon=args.epsilon,
                              M=args.block_base)
    except (ValueError, RuntimeError) as exc:
        _log(f"envelope: {exc}")
        return EXIT_USAGE
    rep = powerlike_check(curve, env.params()) if args.check else None
    out = env.to_json()
    if args.out:
        Path(args.out).write_text(out)
    doc = {"M": env.M, "max_slope": env.max_slope,
           "chi1": env.chi - max(env.max_slope, 1e-12),
           "chi2": env.chi + max(env.max_slope, 1e-12)}
    if rep is not None:
        doc["tight_C22"] = rep.tight_C22
        doc["tight_C23"] = rep.tight_C23
        doc["violations"] = len(rep.violations)
    print(json.dumps(doc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fpplab",
        description="First passage percolation laboratory on augmented "
                    "Delaunay random graphs.",
        epilog="CSV column schemas are documented in docs/csv-schema.md.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a saturated accepted graph")
    g.add_argument("--width", type=float, required=True)
    g.add_argument("--height", type=float, required=True)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--rate", type=float, default=1.0)
    g.add_argument("--margin", type=float, default=7.0)
    g.add_argument("--delta-g", dest="delta_g", type=float, default=0.2)
    g.add_argument("--out", required=True)
    g.add_argument("--json", action="store_true")
    g.set_defaults(func=cmd_gen)

    q = sub.add_parser("geodesic", help="single passage-time query")
    q.add_argument("--graph", required=True)
    q.add_argument("--speed", default="exp:1")
    q.add_argument("--seed", type=int, default=1)
    q.add_argument("--from", dest="frm", required=True, metavar="X,Y")
    q.add_argument("--to", dest="to", required=True, metavar="X,Y")
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_geodesic)

    e = sub.add_parser("experiment", help="run an experiment suite")
    e.add_argument("--config", required=True, help="TOML or JSON config")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="run invariant checks on a graph file")
    v.add_argument("--graph", required=True)
    v.add_argument("--pairs", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_verify)

    n = sub.add_parser("envelope", help="build a sublinearly powerlike majorant")
    n.add_argument("--curve", required=True, help="sigma curve JSON")
    n.add_argument("--chi", type=float, required=True)
    n.add_argument("--epsilon", type=float, default=0.05)
    n.add_argument("--block-base", dest="block_base", type=float, default=None)
    n.add_argument("--out", default=None)
    n.add_argument("--check", action="store_true")
    n.add_argument("--json", action="store_true")
    n.set_defaults(func=cmd_envelope)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
