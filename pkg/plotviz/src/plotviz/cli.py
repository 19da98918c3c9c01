"""dgboltz-plot: render figures from one or more run directories."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, PROFILE_KINDS, render


def build_parser():
    p = argparse.ArgumentParser(
        prog="dgboltz-plot",
        description="Render moment profiles, current surfaces, and pdf "
                    "heatmaps from solver output CSVs")
    p.add_argument("run_dirs", nargs="+",
                   help="run directories (one curve per directory)")
    p.add_argument("--kind", default="all",
                   choices=["all", "moment-profile", "surface", "pdf-heatmap"])
    p.add_argument("--out", default="figs")
    p.add_argument("--time", type=float, default=None,
                   help="snapshot time in ps (default: latest common)")
    p.add_argument("--profiles", nargs="+", default=list(PROFILE_KINDS),
                   choices=list(PROFILE_KINDS))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, run_dirs=args.run_dirs,
                          out_dir=args.out, time=args.time,
                          profiles=tuple(args.profiles))
        written = render(spec)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
