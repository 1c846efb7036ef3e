"""Command-line entry point: turn fedband CSVs into PNG figures."""

import argparse
import sys
from typing import Optional, Sequence

from .plots import KINDS, PlotError, PlotJob, SchemaError, render

DEFAULT_NAMES = {"regret": "regret.png", "alpha-sweep": "alpha_sweep.png"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedband-plots",
        description="Render fedband CSV outputs to PNG figures.",
    )
    parser.add_argument("kind", choices=KINDS,
                        help="figure kind to render")
    parser.add_argument("inputs", nargs="+", metavar="CSV",
                        help="input CSV file(s); regret takes one "
                             "replicate summary per series, alpha-sweep "
                             "takes exactly one sweep table")
    parser.add_argument("--outdir", default=".",
                        help="directory for the PNG (created if absent)")
    parser.add_argument("--name", default=None,
                        help="output file name (default depends on kind)")
    parser.add_argument("--labels", nargs="+", default=None,
                        help="one legend label per input CSV")
    parser.add_argument("--title", default=None, help="figure title")
    return parser


def job_from_args(args: argparse.Namespace) -> PlotJob:
    name = args.name or DEFAULT_NAMES[args.kind]
    out = f"{args.outdir.rstrip('/')}/{name}"
    labels = tuple(args.labels) if args.labels is not None else None
    return PlotJob(inputs=tuple(args.inputs), kind=args.kind, out=out,
                   labels=labels, title=args.title)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = render(job_from_args(args))
    except (PlotError, SchemaError, OSError) as exc:
        print(f"fedband-plots: error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
