#!/usr/bin/env python3
"""Render a layout JSON (from `sldm export-viz`) to a PNG. Needs matplotlib.

    python scripts/plot_layout.py layout.json -o layout.png
"""

import argparse
import json
import sys


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("layout")
    ap.add_argument("-o", "--output", default=None)
    ap.add_argument("--node-size", type=float, default=4.0)
    args = ap.parse_args()

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib is not installed; pip install matplotlib", file=sys.stderr)
        return 1

    with open(args.layout) as fh:
        doc = json.load(fh)
    xs = [n["x"] for n in doc["nodes"]]
    ys = [n["y"] for n in doc["nodes"]]

    fig, ax = plt.subplots(figsize=(6, 6))
    for e in doc.get("edges", []):
        i, j = e["i"], e["j"]
        color = "#4477cc" if e["sign"] > 0 else "#cc4444"
        ax.plot([xs[i], xs[j]], [ys[i], ys[j]], color=color, lw=0.2, alpha=0.25, zorder=1)
    ax.scatter(xs, ys, s=args.node_size, c="black", zorder=2)
    for a in doc.get("archetypes", []):
        ax.scatter([a["x"]], [a["y"]], marker="*", s=160, c="#ff9900", zorder=3)
        ax.annotate(str(a["k"]), (a["x"], a["y"]), fontsize=9)
    ax.set_aspect("equal")
    ax.set_title(f"{doc['mode']} layout, {len(xs)} nodes")
    out = args.output or args.layout.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
