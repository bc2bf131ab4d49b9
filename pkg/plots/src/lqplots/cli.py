# cli.py
"""Command line: `plot compare` and `plot history`.

Exit codes: 0 success, 2 on missing/malformed input columns or an
existing output without --force.
"""

import argparse
import sys

from .render import (MissingColumn, OutputExists, PlotSpec,
                     render_comparison, render_history)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Figures from lqdyn comparison and history CSVs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare",
                       help="true-vs-learned panels from a comparison CSV")
    p.add_argument("csv")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--vars", nargs="*", default=None,
                   help="variable subset, e.g. --vars x1 x3")
    p.add_argument("--title", default="")
    p.add_argument("--force", action="store_true",
                   help="overwrite an existing output file")
    p.add_argument("--svg", action="store_true",
                   help="write vector output instead of PNG")

    p = sub.add_parser("history", help="loss curves from a history CSV")
    p.add_argument("csv")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--svg", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            spec = PlotSpec(csv_path=args.csv, output_path=args.output,
                            variables=tuple(args.vars or ()),
                            title=args.title, force=args.force,
                            svg=args.svg)
            out = render_comparison(spec)
        else:
            out = render_history(args.csv, args.output, force=args.force,
                                 svg=args.svg)
        print(f"wrote {out}")
    except (MissingColumn, OutputExists, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
