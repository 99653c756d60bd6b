"""fpplab-plot: render figures from experiment outputs.

Usage:
  fpplab-plot sigma --in hmu.csv --out sigma.png
  fpplab-plot tails --kind wandering --in wander_tail.csv --out tails.png
  fpplab-plot tube --graph g.json --geodesic geo.json --sigma sigma.json \
      --out tube.png

Every figure is written as PNG plus an SVG twin; reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import sys

from .figures import SchemaError, plot_sigma, plot_tails, plot_tube


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fpplab-plot")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sigma", help="log-log fluctuation scale with fit")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", required=True)

    t = sub.add_parser("tails", help="exceedance tails with Wilson bands")
    t.add_argument("--kind", required=True,
                   choices=["fluctuation", "wandering", "straightness",
                            "density"])
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--c34", type=float, default=1.0)

    u = sub.add_parser("tube", help="tube functional level sets with geodesic")
    u.add_argument("--graph", required=True)
    u.add_argument("--geodesic", required=True)
    u.add_argument("--sigma", required=True)
    u.add_argument("--out", required=True)
    u.add_argument("--c23", type=float, default=1.5)
    u.add_argument("--chi2", type=float, default=0.45)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "sigma":
            outs = plot_sigma(args.infile, args.out)
        elif args.command == "tails":
            outs = plot_tails(args.infile, args.out, kind=args.kind,
                              c34=args.c34)
        else:
            outs = plot_tube(args.graph, args.geodesic, args.sigma, args.out,
                             c23=args.c23, chi2=args.chi2)
    except SchemaError as exc:
        print(f"fpplab-plot: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"fpplab-plot: {exc}", file=sys.stderr)
        return 2
    for o in outs:
        print(o)
    return 0


if __name__ == "__main__":
    sys.exit(main())
