"""Agreement analysis for a ratings export.

Reports Krippendorff's alpha (interval) overall and per batch, attention
check pass rates per annotator, and mean-absolute-difference disagreement,
after per-annotator z-scoring.

Usage: python scripts/annotation_agreement.py ratings.jsonl
"""

import sys
from collections import defaultdict

from contrastbench.stats import (
    attention_check_pass,
    krippendorff_alpha_interval,
    load_ratings,
    mad_disagreement,
    zscore_normalize,
)


def run(path):
    records = load_ratings(path)
    checks = [r for r in records if r.is_attention_check]
    real = [r for r in records if not r.is_attention_check]
    print(f"{len(real)} ratings, {len(checks)} attention checks")

    if checks:
        per_annotator = defaultdict(list)
        for check in checks:
            per_annotator[check.annotator_id].append(attention_check_pass(check))
        for annotator, results in sorted(per_annotator.items()):
            print(
                f"attention {annotator}: {sum(results)}/{len(results)} passed"
            )

    print(f"alpha overall: {krippendorff_alpha_interval(real):.4f}")
    by_batch = defaultdict(list)
    for record in real:
        by_batch[record.batch_id].append(record)
    for batch, batch_records in sorted(by_batch.items()):
        items = defaultdict(int)
        for r in batch_records:
            items[r.item_id] += 1
        if any(count > 1 for count in items.values()):
            alpha = krippendorff_alpha_interval(batch_records)
            print(f"alpha {batch}: {alpha:.4f}")

    normalized = zscore_normalize(real)
    if normalized.flagged_annotators:
        print("flagged zero-variance annotators:", normalized.flagged_annotators)
    mad = mad_disagreement(real)
    print(f"mean absolute disagreement: {mad.get('all', float('nan')):.4f}")


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit(__doc__)
    run(sys.argv[1])
