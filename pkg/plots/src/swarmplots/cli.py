"""Command line entry point: render the standard figures from a metrics CSV."""

from __future__ import annotations

import argparse
import sys

from .render import FORMATS, EmptyInput, FigureSpec, SchemaError, render_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render trajectory, order, and velocity figures "
        "from a swarm metrics CSV.",
    )
    parser.add_argument("--metrics", required=True,
                        help="path to the metrics CSV")
    parser.add_argument("--out-dir", required=True,
                        help="directory for the rendered figures")
    parser.add_argument("--format", choices=FORMATS, default="png",
                        help="image format (default: png)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(metrics_path=args.metrics, out_dir=args.out_dir,
                      fmt=args.format)
    try:
        paths = render_all(spec)
    except (SchemaError, EmptyInput, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
