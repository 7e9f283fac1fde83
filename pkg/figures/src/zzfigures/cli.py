"""Batch figure rendering: render-figures --spec <path>.

The spec file is a JSON list of figure records, each naming its kind
("density-comparison" or "accuracy-curves"), labeled input CSVs, and an
output image path.
"""

from __future__ import annotations

import argparse
import json
import sys

from .render import FigureSpec, SchemaError, render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render-figures", description=__doc__)
    parser.add_argument("--spec", required=True, help="JSON list of figure records")
    args = parser.parse_args(argv)
    try:
        with open(args.spec) as fh:
            raw = json.load(fh)
        if not isinstance(raw, list):
            raise SchemaError("spec must be a JSON list of figure records")
        specs = [FigureSpec.from_dict(item) for item in raw]
        outputs = render_all(specs)
    except (OSError, json.JSONDecodeError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in outputs:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
