"""Command line front end: figure kind, input globs, output path.

Exit codes: 0 success, 1 bad inputs (schema mismatch, empty series,
invalid spec), 2 usage error (argparse), 3 I/O failure.
"""
from __future__ import annotations

import argparse
import glob
import sys
from pathlib import Path

from .errors import EmptySeriesError, SchemaMismatchError
from .figures import DEFAULT_NOISE_FLOOR, KINDS, FigureSpec, render

EXIT_OK, EXIT_BAD_INPUT, EXIT_IO = 0, 1, 3


def _expand(patterns) -> list[str]:
    paths: list[str] = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        # keep non-matching literals so missing files fail loudly later
        paths.extend(hits if hits else [pat])
    return paths


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="figkit",
        description="render standard figures from solver run artifacts")
    p.add_argument("kind", choices=KINDS, help="figure kind")
    p.add_argument("inputs", nargs="+",
                   help="input CSV files or glob patterns")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--fit-band", nargs=2, type=int, metavar=("KMIN", "KMAX"),
                   help="shell band for the spectrum decay fit")
    p.add_argument("--noise-floor", type=float, default=DEFAULT_NOISE_FLOOR,
                   help="ignore shells at or below this amplitude")
    p.add_argument("--linear", action="store_true",
                   help="force a linear y axis")
    p.add_argument("--title", help="figure title override")
    p.add_argument("--dpi", type=int, default=110)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(Path(p) for p in _expand(args.inputs)),
        output=Path(args.out),
        fit_band=tuple(args.fit_band) if args.fit_band else None,
        noise_floor=args.noise_floor,
        logy=False if args.linear else None,
        title=args.title,
        dpi=args.dpi)
    try:
        result = render(spec)
    except (SchemaMismatchError, EmptySeriesError, ValueError) as err:
        print(f"figkit: {err}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as err:
        print(f"figkit: {err}", file=sys.stderr)
        return EXIT_IO
    line = f"wrote {result.path}"
    if "tau_fit" in result.details:
        line += (f"  (decay fit tau = {result.details['tau_fit']:.6g}, "
                 f"R^2 = {result.details['fit_r2']:.4f})")
    print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
