"""Rank agreement between two scorers' per-category accuracies.

Reads a report summary.json, pulls each scorer's scaled accuracies over the
(category, basis, orientation) cells they share, and prints Kendall tau-b,
tie-aware pairwise accuracy, and Pearson between the two accuracy vectors.

Usage: python scripts/compare_scorers.py runs/demo/report/summary.json scorerA scorerB
"""

import json
import sys

from contrastbench.stats import PairedSeries, kendall_tau_b, pairwise_accuracy, pearson


def run(summary_path, scorer_a, scorer_b):
    summary = json.loads(open(summary_path, encoding="utf-8").read())
    cells = {}
    for row in summary["directions"]:
        if row["scaled_accuracy"] is None:
            continue
        key = (row["category"], row["basis"], row["orientation"])
        cells.setdefault(key, {})[row["scorer_id"]] = row["scaled_accuracy"]

    items, xs, ys = [], [], []
    for key, per_scorer in sorted(cells.items()):
        if scorer_a in per_scorer and scorer_b in per_scorer:
            items.append("|".join(key))
            xs.append(per_scorer[scorer_a])
            ys.append(per_scorer[scorer_b])
    if len(xs) < 2:
        sys.exit(f"only {len(xs)} shared cells between {scorer_a} and {scorer_b}")

    series = PairedSeries(tuple(items), tuple(xs), tuple(ys))
    print(f"shared cells: {len(xs)}")
    print(f"kendall tau-b:     {kendall_tau_b(series):+.4f}")
    print(f"pairwise accuracy: {pairwise_accuracy(series):.4f}")
    print(f"pearson:           {pearson(series):+.4f}")


if __name__ == "__main__":
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    run(*sys.argv[1:])
