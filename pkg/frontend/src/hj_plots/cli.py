"""Command line: `plots <kind> --in file.csv --out fig.png`.

Exit codes: 0 success, 2 unreadable input or schema mismatch (the
column diff is printed to stderr).
"""
from __future__ import annotations

import argparse
import sys

from .figures import plot_lyapunov, plot_orbit, plot_profile, plot_rate
from .readers import SchemaError

__all__ = ["main"]

_KINDS = {
    "rate": plot_rate,
    "profile": plot_profile,
    "orbit": plot_orbit,
    "lyapunov": plot_lyapunov,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render kicked-hj CSV outputs into figures.")
    sub = parser.add_subparsers(dest="kind", required=True)
    for name in _KINDS:
        p = sub.add_parser(name)
        p.add_argument("--in", dest="infile", required=True)
        p.add_argument("--out", dest="outfile", required=True)
        p.add_argument("--title", default=None)
        p.add_argument("--xlabel", default=None)
        p.add_argument("--ylabel", default=None)
    args = parser.parse_args(argv)
    try:
        result = _KINDS[args.kind](args.infile, args.outfile, title=args.title,
                                   xlabel=args.xlabel, ylabel=args.ylabel)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.kind}: wrote {args.outfile} ({result})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
