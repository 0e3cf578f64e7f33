"""Command line entry point: one figure per invocation.

Exit codes: 0 success, 2 bad input (missing file, schema mismatch, bad
flags).
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .figures import KINDS, FigureSpec, render
from .io import SchemaMismatch, read_lambda_json


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sirswitch-plots",
        description="Render figures from sirswitch CSV/JSON artifacts")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--input", action="append", required=True,
                        help="input artifact; repeat to overlay several")
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--out", required=True, help="output image path")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--lam", type=float, default=None,
                       help="threshold reference value to draw")
    group.add_argument("--lam-json", default=None,
                       help="threshold report JSON to take the reference from")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        lam = args.lam
        if args.lam_json is not None:
            lam = read_lambda_json(args.lam_json)
        spec = FigureSpec(inputs=tuple(args.input), kind=args.kind,
                          output=args.out, lam=lam)
        out = render(spec)
    except (SchemaMismatch, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
