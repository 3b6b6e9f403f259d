#!/usr/bin/env python3
"""Plot metric curves from one or more metrics.csv files.

Usage:
    tools/plot_metrics.py out/classify-m2-bp/metrics.csv out/classify-m2-pc-fkl/metrics.csv \
        --metric accuracy --out accuracy.png

Each curve is labeled by the parent directory of its CSV. Empty fields in the
CSV are metrics that the writer had no value for at that row (e.g. accuracy on
pure energy rows) and are skipped.
"""

import argparse
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

METRICS = ["total_energy", "train_loss", "test_loss", "accuracy", "perplexity"]


def load(path):
    rows = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            rows.append(row)
    return rows


def series(rows, metric):
    xs, ys = [], []
    for row in rows:
        v = row.get(metric, "")
        if v == "":
            continue
        xs.append(int(row["step"]))
        ys.append(float(v))
    return xs, ys


def pick_metric(rows):
    for m in ("accuracy", "perplexity", "test_loss", "total_energy"):
        if any(r.get(m, "") != "" for r in rows):
            return m
    raise SystemExit("no plottable columns found")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csvs", nargs="+", help="metrics.csv files")
    ap.add_argument("--metric", choices=METRICS, help="column to plot (default: auto)")
    ap.add_argument("--out", default="metrics.png", help="output image")
    ap.add_argument("--logy", action="store_true", help="log scale on the y axis")
    args = ap.parse_args()

    metric = args.metric
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for path in args.csvs:
        rows = load(path)
        if metric is None:
            metric = pick_metric(rows)
        xs, ys = series(rows, metric)
        if not xs:
            print(f"warning: {path} has no values for {metric}")
            continue
        ax.plot(xs, ys, marker="o", markersize=3, label=pathlib.Path(path).parent.name)

    ax.set_xlabel("step")
    ax.set_ylabel(metric)
    if args.logy:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
