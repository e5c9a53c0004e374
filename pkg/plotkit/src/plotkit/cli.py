"""Command line entry: plotkit <kind> <csv...> -o <png>."""

import argparse
import sys

from .io import PlotkitError
from .render import KINDS, render


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render simulation CSVs as figures."
    )
    parser.add_argument("kind", choices=sorted(KINDS))
    parser.add_argument("csvs", nargs="+", metavar="csv")
    parser.add_argument("-o", "--out", required=True, help="output image path")
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    try:
        meta = render(args.kind, args.csvs, args.out, dpi=args.dpi)
    except (PlotkitError, OSError) as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return 1
    note = f" (eta {meta['eta']:.3f})" if "eta" in meta else ""
    print(f"wrote {args.out}{note}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
