"""Command-line interface: ``spheredyn-render render --spec <path>``."""

from __future__ import annotations

import argparse
import sys

from .figures import load_spec, render
from .schema import MissingColumnError, SchemaMismatchError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spheredyn-render",
        description="Render sphere snapshots and metric curves from spheredyn CSV artifacts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render a figure described by a TOML spec")
    p_render.add_argument("--spec", required=True, help="path to the figure spec file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = render(load_spec(args.spec))
    except (SchemaMismatchError, MissingColumnError) as exc:
        print(f"[spheredyn-render] bad input: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"[spheredyn-render] {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
