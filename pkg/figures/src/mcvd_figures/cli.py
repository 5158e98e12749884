"""Figure-rendering command line.

    mcvd-figures --in <result-dir> --out <image> --kind <kind> [--normalize]

Exit codes: 0 success, 2 schema/config error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from . import FIGURE_KINDS, __version__
from .io import SchemaError
from .render import FigureRequest, render

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcvd-figures",
        description="Render paper-style figures from mcvd result directories.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--in", dest="results_dir", required=True,
                        help="result directory containing summary.json")
    parser.add_argument("--out", dest="output_path", required=True,
                        help="output image path (extension selects format)")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS,
                        help="figure kind to render")
    parser.add_argument("--normalize", action="store_true",
                        help="scale pattern values so the maximum is 1")
    parser.add_argument("--no-grid", action="store_true", help="disable grid lines")
    parser.add_argument("--title", default=None, help="custom figure title")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    request = FigureRequest(
        kind=args.kind,
        results_dir=args.results_dir,
        output_path=args.output_path,
        normalize=args.normalize,
        grid=not args.no_grid,
        title=args.title,
    )
    try:
        path = render(request)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
