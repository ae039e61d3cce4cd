"""Batch entry point: ``render --spec spec.json``.

The spec JSON mirrors PlotSpec plus a ``kind`` selector:

    {
      "kind": "convergence",            // or "comparison"
      "curves_csv": "sweep.csv",
      "hitting_csv": "sweep_hitting.csv",   // optional
      "output": "sweep.svg",
      "format": "svg",                  // or "png"
      "sweep_ids": ["delta=0.15;eps=0.05"],   // optional selection/order
      "labels": {"delta=0.15;eps=0.05": "gap 0.15"},
      "thresholds": 0.95                // float or {sweep_id: float}
    }
"""

from __future__ import annotations

import argparse
import json
import sys

from .render import PlotSpec, SchemaError, render_comparison, render_convergence


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render")
    parser.add_argument("--spec", required=True, help="path to plot-spec JSON")
    args = parser.parse_args(argv)

    with open(args.spec) as fh:
        raw = json.load(fh)
    kind = raw.pop("kind", "convergence")
    if "sweep_ids" in raw and raw["sweep_ids"] is not None:
        raw["sweep_ids"] = tuple(raw["sweep_ids"])
    try:
        spec = PlotSpec(**raw)
        if kind == "convergence":
            out = render_convergence(spec)
        elif kind == "comparison":
            out = render_comparison(spec)
        else:
            print(f"unknown kind {kind!r}", file=sys.stderr)
            return 2
    except (SchemaError, OSError) as exc:
        print(f"render failed: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
