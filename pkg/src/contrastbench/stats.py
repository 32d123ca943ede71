"""Agreement and correlation statistics for meta-evaluation and human studies.

Kendall's tau-b and Pearson delegate to scipy; pairwise accuracy (tie-aware)
and Krippendorff's alpha (interval metric) are implemented here. Ratings are
ingested from the annotation service's JSONL export, one record per line.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from scipy import stats as _scipy_stats

from .utils import atomic_write_text


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class RatingRecord:
    annotator_id: str
    item_id: str
    value: float
    batch_id: str = ""
    is_attention_check: bool = False
    check_range: tuple[float, float] | None = None


@dataclass(frozen=True)
class PairedSeries:
    items: tuple[str, ...]
    x: tuple[float, ...]  # reference (e.g. human) series
    y: tuple[float, ...]  # metric series

    def __post_init__(self) -> None:
        if not (len(self.items) == len(self.x) == len(self.y)):
            raise StatsError("paired series fields must have equal length")
        if len(self.x) < 2:
            raise StatsError("paired series needs at least 2 items")

    @classmethod
    def of(cls, x: Sequence[float], y: Sequence[float]) -> "PairedSeries":
        return cls(tuple(str(i) for i in range(len(x))), tuple(x), tuple(y))


def _pair_counts(series: PairedSeries):
    """Classify all item pairs: concordant, discordant, and tie categories."""
    n = len(series.x)
    concordant = discordant = x_only = y_only = both = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = series.x[j] - series.x[i]
            dy = series.y[j] - series.y[i]
            if dx == 0 and dy == 0:
                both += 1
            elif dx == 0:
                x_only += 1
            elif dy == 0:
                y_only += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    return concordant, discordant, x_only, y_only, both


def kendall_tau_b(series: PairedSeries) -> float:
    """Tie-corrected Kendall rank correlation.

    (C - D) / sqrt((C + D + Ty) * (C + D + Tx)) over all item pairs, where
    Tx and Ty count pairs tied in exactly one series. Returns NaN when
    either series is fully tied (the coefficient is undefined there);
    callers should report that case rather than treat NaN as zero.
    """
    if len(set(series.x)) == 1 or len(set(series.y)) == 1:
        return math.nan
    c, d, tx, ty, _ = _pair_counts(series)
    return (c - d) / math.sqrt((c + d + tx) * (c + d + ty))


def kendall_tau_b_fraction(series: PairedSeries) -> Fraction:
    """Exact rational tau for tie-free series.

    With ties the tie-corrected denominator is irrational in general, so
    this raises StatsError; use kendall_tau_b for the float form.
    """
    c, d, tx, ty, both = _pair_counts(series)
    if tx or ty or both:
        raise StatsError("exact tau is only defined for tie-free series")
    return Fraction(c - d, c + d)


def pairwise_accuracy_fraction(series: PairedSeries) -> Fraction:
    """Exact rational pairwise accuracy; credits are multiples of 1/2."""
    c, _, x_only, _, both = _pair_counts(series)
    n = len(series.x)
    total = n * (n - 1) // 2
    if total == 0:
        raise StatsError("no comparable pairs")
    return Fraction(2 * c + 2 * both + x_only, 2 * total)


def pairwise_accuracy(series: PairedSeries) -> float:
    """Fraction of item pairs ordered concordantly by both series.

    Tie handling: a pair tied in both series counts as concordant; a pair
    tied only in the reference series earns half credit; a pair ordered in
    the reference but tied in the metric earns nothing. Without ties this
    equals (kendall_tau_b + 1) / 2, an identity that holds exactly in the
    rational forms (see the *_fraction variants).
    """
    return float(pairwise_accuracy_fraction(series))


def pearson(series: PairedSeries) -> float:
    """Product-moment correlation; NaN when either side has zero variance."""
    if len(set(series.x)) == 1 or len(set(series.y)) == 1:
        return math.nan
    result = _scipy_stats.pearsonr(series.x, series.y)
    return float(result.statistic)


def krippendorff_alpha_interval(records: Iterable[RatingRecord]) -> float:
    """Krippendorff's alpha with the interval metric (squared difference).

    Observed disagreement averages squared differences within items (over all
    ordered pairs of values for the same item); expected disagreement uses
    all ordered pairs across the pooled values. Items with fewer than two
    ratings are not pairable. Alpha is 1 for perfect agreement.
    """
    by_item: dict[str, list[float]] = {}
    for record in records:
        by_item.setdefault(record.item_id, []).append(record.value)
    units = {item: vals for item, vals in by_item.items() if len(vals) > 1}
    if not units:
        raise StatsError("no items with ratings from two or more annotators")

    n = sum(len(vals) for vals in units.values())
    # Sum over ordered pairs (i != j) of (v_i - v_j)^2, via moments:
    # 2*m*sum(v^2) - 2*(sum v)^2 for a group of m values.
    d_observed = 0.0
    pooled_sum = 0.0
    pooled_sq = 0.0
    for vals in units.values():
        m = len(vals)
        s1 = sum(vals)
        s2 = sum(v * v for v in vals)
        d_observed += (2 * m * s2 - 2 * s1 * s1) / (m - 1)
        pooled_sum += s1
        pooled_sq += s2
    d_observed /= n
    d_expected = (2 * n * pooled_sq - 2 * pooled_sum * pooled_sum) / (n * (n - 1))
    if d_expected == 0.0:
        return 1.0
    return 1.0 - d_observed / d_expected


@dataclass(frozen=True)
class NormalizationResult:
    records: tuple[RatingRecord, ...]
    flagged_annotators: tuple[str, ...]


def zscore_normalize(records: Iterable[RatingRecord]) -> NormalizationResult:
    """Normalize ratings per annotator to mean 0, population sd 1.

    Attention checks are excluded from the statistics and from the output.
    Annotators with zero variance are flagged and their ratings dropped.
    """
    real = [r for r in records if not r.is_attention_check]
    by_annotator: dict[str, list[RatingRecord]] = {}
    for record in real:
        by_annotator.setdefault(record.annotator_id, []).append(record)

    flagged = []
    params: dict[str, tuple[float, float]] = {}
    for annotator, recs in by_annotator.items():
        values = [r.value for r in recs]
        mean = statistics.fmean(values)
        sd = statistics.pstdev(values)
        if sd == 0.0:
            flagged.append(annotator)
        else:
            params[annotator] = (mean, sd)

    out = tuple(
        replace(r, value=(r.value - params[r.annotator_id][0]) / params[r.annotator_id][1])
        for r in real
        if r.annotator_id in params
    )
    return NormalizationResult(records=out, flagged_annotators=tuple(sorted(flagged)))


def mad_disagreement(
    records: Iterable[RatingRecord],
    item_group: Mapping[str, str] | Callable[[str], str] | None = None,
) -> dict[str, float]:
    """Mean absolute difference between annotator scores, averaged per group.

    For each item with at least two ratings, the mean |v_a - v_b| over
    annotator pairs; items are then averaged within their group ("all" when
    no grouping is given). Singleton items are skipped, attention checks
    ignored.
    """
    if item_group is None:
        group_of = lambda item_id: "all"
    elif callable(item_group):
        group_of = item_group
    else:
        group_of = lambda item_id: item_group.get(item_id, "all")

    by_item: dict[str, list[float]] = {}
    for record in records:
        if record.is_attention_check:
            continue
        by_item.setdefault(record.item_id, []).append(record.value)

    per_group: dict[str, list[float]] = {}
    for item_id, values in by_item.items():
        if len(values) < 2:
            continue
        diffs = [
            abs(values[i] - values[j])
            for i in range(len(values))
            for j in range(i + 1, len(values))
        ]
        per_group.setdefault(group_of(item_id), []).append(statistics.fmean(diffs))
    return {group: statistics.fmean(vals) for group, vals in sorted(per_group.items())}


def attention_check_pass(record: RatingRecord) -> bool:
    """True iff the rating lies inside the closed instructed range."""
    if not record.is_attention_check or record.check_range is None:
        raise StatsError(f"record {record.item_id!r} carries no attention-check range")
    lo, hi = record.check_range
    return lo <= record.value <= hi


# ---------------------------------------------------------------------------
# Ratings file IO (one JSON record per line)


def record_to_json(record: RatingRecord) -> dict:
    return {
        "annotator_id": record.annotator_id,
        "item_id": record.item_id,
        "value": record.value,
        "batch_id": record.batch_id,
        "is_attention_check": record.is_attention_check,
        "check_range": list(record.check_range) if record.check_range else None,
    }


def record_from_json(raw: dict) -> RatingRecord:
    check_range = raw.get("check_range")
    return RatingRecord(
        annotator_id=raw["annotator_id"],
        item_id=raw["item_id"],
        value=float(raw["value"]),
        batch_id=raw.get("batch_id", ""),
        is_attention_check=bool(raw.get("is_attention_check", False)),
        check_range=tuple(check_range) if check_range else None,
    )


def save_ratings(records: Iterable[RatingRecord], path: Path | str) -> None:
    lines = [json.dumps(record_to_json(r), sort_keys=True) for r in records]
    atomic_write_text(Path(path), "\n".join(lines) + ("\n" if lines else ""))


def load_ratings(path: Path | str) -> list[RatingRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            records.append(record_from_json(json.loads(line)))
    return records
