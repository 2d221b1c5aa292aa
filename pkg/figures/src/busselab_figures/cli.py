"""Command line: ``busselab-render <kind> --in data.csv --out fig.png``.

Exit status: 0 ok, 2 for schema problems (missing columns are listed by
name), 1 for other failures.
"""

from __future__ import annotations

import argparse
import sys

from busselab_figures.render import FIGURE_KINDS, FigureSpec, SchemaError, render


def _parse_range(text: str) -> tuple[float, float]:
    lo, hi = (float(part) for part in text.split(","))
    return lo, hi


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="busselab-render", description=__doc__)
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--boundary", help="boundary CSV (a, k_low, k_high) overlay")
    parser.add_argument("--xlim", type=_parse_range, help="x axis range lo,hi")
    parser.add_argument("--ylim", type=_parse_range, help="y axis range lo,hi")
    args = parser.parse_args(argv)

    try:
        spec = FigureSpec(
            kind=args.kind,
            inputs=tuple(args.inputs),
            out=args.out,
            boundary=args.boundary,
            xlim=args.xlim,
            ylim=args.ylim,
        )
        path = render(spec)
    except SchemaError as err:
        print(f"schema mismatch: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
