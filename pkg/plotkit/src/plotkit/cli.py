"""plotkit --kind KIND --in CSV [--in CSV ...] --out PATH"""

import argparse
import sys

from .render import KINDS, PlotJob, SchemaError, render


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render figures/tables from specelast CSV outputs",
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output image/table path")
    args = parser.parse_args(argv)
    try:
        job = PlotJob(kind=args.kind, inputs=tuple(args.inputs), output=args.out)
        render(job)
    except (SchemaError, OSError) as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
