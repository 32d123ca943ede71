"""Contrastive evaluation engine.

For every sample a metric is checked in four directions: the comparison can
swap the text or the image of a matching pair (text-based vs image-based),
and the matching pair can be the original or the contrast pair (forward vs
inverse). Comparisons use strict '>', so score ties count as failures; tie
counts are reported separately to keep constant-scorer pathologies visible.

Synthetic suites aggregate pass/fail over samples; human-supervised suites
compute per-prompt win ratios and average them so every prompt weighs
equally. Raw accuracies are rescaled so that the analytic random baseline
maps to 0, perfect preference to +1, and inverted preference to -1.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from enum import Enum

from .dataset import SamplePair, Suite
from .scoring import ScoreTable
from .utils import text_digest


class Basis(str, Enum):
    TEXT = "text_based"
    IMAGE = "image_based"


class Orientation(str, Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


@dataclass(frozen=True)
class Direction:
    basis: Basis
    orientation: Orientation

    @property
    def label(self) -> str:
        return f"{self.orientation.value}_{self.basis.value}"


ALL_DIRECTIONS = (
    Direction(Basis.TEXT, Orientation.FORWARD),
    Direction(Basis.TEXT, Orientation.INVERSE),
    Direction(Basis.IMAGE, Orientation.FORWARD),
    Direction(Basis.IMAGE, Orientation.INVERSE),
)


class Result(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    TIE = "tie"
    UNUSABLE = "unusable"


@dataclass(frozen=True)
class SampleOutcome:
    sample_id: str
    direction: Direction
    result: Result
    selected_index: int | None = None  # argmax image index, text-based only
    margin: float | None = None  # winner minus loser; 0 exactly on ties


@dataclass(frozen=True)
class RatioOutcome:
    sample_id: str
    direction: Direction
    ratio: float | None  # None when unusable
    wins: int = 0
    ties: int = 0
    comparisons: int = 0

    @property
    def usable(self) -> bool:
        return self.ratio is not None


def _scores_for(
    table: ScoreTable, scorer_id: str, text: str, images
) -> list[float] | None:
    th = text_digest(text)
    values = []
    for record in images:
        value = table.get(scorer_id, th, record.sha256)
        if value is None:
            return None
        values.append(value)
    return values


def _argmax_lowest_index(values: list[float]) -> int:
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


def _compare(matching: float, contrast: float):
    if matching > contrast:
        return Result.PASS, matching - contrast
    if matching == contrast:
        return Result.TIE, 0.0
    return Result.FAIL, contrast - matching


def _synthetic_sides_ok(sample: SamplePair) -> bool:
    n = sample.images_original.count
    return (
        n >= 1
        and len(sample.images_original.images) == n
        and len(sample.images_contrast.images) == n
    )


def eval_synthetic_text(
    sample: SamplePair,
    table: ScoreTable,
    scorer_id: str,
    orientation: Orientation,
) -> SampleOutcome:
    """Pick the best matching-side image by argmax, then compare texts on it.

    Forward: j* maximizes score(T_original, original image i); the test is
    score(T_original, image j*) > score(T_contrast, image j*). Inverse swaps
    original and contrast. Argmax ties break to the lowest index; a missing
    score or an incomplete image side makes the sample unusable.
    """
    direction = Direction(Basis.TEXT, orientation)
    unusable = SampleOutcome(sample.sample_id, direction, Result.UNUSABLE)
    if not _synthetic_sides_ok(sample):
        return unusable

    if orientation is Orientation.FORWARD:
        matching_text = sample.pair.original_text
        contrast_text = sample.pair.contrast_text
        pool = sample.images_original.images
    else:
        matching_text = sample.pair.contrast_text
        contrast_text = sample.pair.original_text
        pool = sample.images_contrast.images

    matching_scores = _scores_for(table, scorer_id, matching_text, pool)
    if matching_scores is None:
        return unusable
    j_star = _argmax_lowest_index(matching_scores)
    contrast_score = table.get(
        scorer_id, text_digest(contrast_text), pool[j_star].sha256
    )
    if contrast_score is None:
        return unusable

    result, margin = _compare(matching_scores[j_star], contrast_score)
    return SampleOutcome(
        sample.sample_id, direction, result, selected_index=j_star, margin=margin
    )


def eval_synthetic_image(
    sample: SamplePair,
    table: ScoreTable,
    scorer_id: str,
    orientation: Orientation,
) -> SampleOutcome:
    """Compare the per-side maxima of one text's scores over both image sets.

    Forward scores everything with the original text and requires the best
    original image to beat the best contrast image; inverse scores with the
    contrast text and swaps the sides.
    """
    direction = Direction(Basis.IMAGE, orientation)
    unusable = SampleOutcome(sample.sample_id, direction, Result.UNUSABLE)
    if not _synthetic_sides_ok(sample):
        return unusable

    if orientation is Orientation.FORWARD:
        text = sample.pair.original_text
        matching_pool = sample.images_original.images
        contrast_pool = sample.images_contrast.images
    else:
        text = sample.pair.contrast_text
        matching_pool = sample.images_contrast.images
        contrast_pool = sample.images_original.images

    matching_scores = _scores_for(table, scorer_id, text, matching_pool)
    contrast_scores = _scores_for(table, scorer_id, text, contrast_pool)
    if matching_scores is None or contrast_scores is None:
        return unusable

    result, margin = _compare(max(matching_scores), max(contrast_scores))
    return SampleOutcome(sample.sample_id, direction, result, margin=margin)


def eval_human_text(
    sample: SamplePair,
    table: ScoreTable,
    scorer_id: str,
    orientation: Orientation,
) -> RatioOutcome:
    """Ratio of matching-side images on which the matching text wins strictly.

    Expects a sample whose image sets already contain only accepted images
    (see dataset.filter_for_evaluation).
    """
    direction = Direction(Basis.TEXT, orientation)
    if orientation is Orientation.FORWARD:
        matching_text = sample.pair.original_text
        contrast_text = sample.pair.contrast_text
        pool = sample.images_original.images
    else:
        matching_text = sample.pair.contrast_text
        contrast_text = sample.pair.original_text
        pool = sample.images_contrast.images

    if not pool:
        return RatioOutcome(sample.sample_id, direction, None)
    matching_scores = _scores_for(table, scorer_id, matching_text, pool)
    contrast_scores = _scores_for(table, scorer_id, contrast_text, pool)
    if matching_scores is None or contrast_scores is None:
        return RatioOutcome(sample.sample_id, direction, None)

    wins = sum(1 for m, c in zip(matching_scores, contrast_scores) if m > c)
    ties = sum(1 for m, c in zip(matching_scores, contrast_scores) if m == c)
    return RatioOutcome(
        sample.sample_id,
        direction,
        ratio=wins / len(pool),
        wins=wins,
        ties=ties,
        comparisons=len(pool),
    )


def eval_human_image(
    sample: SamplePair,
    table: ScoreTable,
    scorer_id: str,
    orientation: Orientation,
) -> RatioOutcome:
    """Win ratio over the full cross product of matching x contrast images.

    Both sides are scored with the matching text; every (matching image,
    contrast image) pair contributes one strict comparison.
    """
    direction = Direction(Basis.IMAGE, orientation)
    if orientation is Orientation.FORWARD:
        text = sample.pair.original_text
        matching_pool = sample.images_original.images
        contrast_pool = sample.images_contrast.images
    else:
        text = sample.pair.contrast_text
        matching_pool = sample.images_contrast.images
        contrast_pool = sample.images_original.images

    if not matching_pool or not contrast_pool:
        return RatioOutcome(sample.sample_id, direction, None)
    matching_scores = _scores_for(table, scorer_id, text, matching_pool)
    contrast_scores = _scores_for(table, scorer_id, text, contrast_pool)
    if matching_scores is None or contrast_scores is None:
        return RatioOutcome(sample.sample_id, direction, None)

    wins = ties = 0
    for m in matching_scores:
        for c in contrast_scores:
            if m > c:
                wins += 1
            elif m == c:
                ties += 1
    total = len(matching_scores) * len(contrast_scores)
    return RatioOutcome(
        sample.sample_id,
        direction,
        ratio=wins / total,
        wins=wins,
        ties=ties,
        comparisons=total,
    )


def random_baseline(basis: Basis, suite: Suite, n: int) -> float:
    """Expected accuracy of a random scorer under the given protocol.

    Synthetic text-based evaluation pre-selects the best of n matching images,
    which lifts a random scorer to 1 - 1/(n+1); every other setup is an even
    coin flip at 0.5.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if suite is Suite.SYNTHETIC and basis is Basis.TEXT:
        return 1.0 - 1.0 / (n + 1)
    return 0.5


def scale_accuracy(raw: float, baseline: float) -> float:
    """Piecewise-linear rescaling: baseline -> 0, 1 -> +1, 0 -> -1."""
    if not 0.0 < baseline < 1.0:
        raise ValueError(f"baseline must be in (0, 1), got {baseline}")
    if not 0.0 <= raw <= 1.0:
        raise ValueError(f"raw accuracy must be in [0, 1], got {raw}")
    if raw >= baseline:
        return (raw - baseline) / (1.0 - baseline)
    return (raw - baseline) / baseline


# ---------------------------------------------------------------------------
# Suite evaluation and aggregation


@dataclass(frozen=True)
class EvaluationRow:
    """One sample evaluated in one direction by one scorer, plus grouping info."""

    sample_id: str
    suite: Suite
    category: str
    scorer_id: str
    basis: Basis
    orientation: Orientation
    text_model: str
    image_model: str
    n_images: int
    result: Result | None = None  # synthetic
    selected_index: int | None = None
    margin: float | None = None
    ratio: float | None = None  # human-supervised
    wins: int = 0
    ties: int = 0
    comparisons: int = 0

    @property
    def usable(self) -> bool:
        if self.suite is Suite.SYNTHETIC:
            return self.result is not Result.UNUSABLE
        return self.ratio is not None


def evaluate_sample(
    sample: SamplePair,
    table: ScoreTable,
    scorer_id: str,
    directions=ALL_DIRECTIONS,
) -> list[EvaluationRow]:
    rows = []
    for direction in directions:
        common = dict(
            sample_id=sample.sample_id,
            suite=sample.suite,
            category=sample.category,
            scorer_id=scorer_id,
            basis=direction.basis,
            orientation=direction.orientation,
            text_model=sample.text_model,
            image_model=sample.image_model,
            n_images=sample.images_original.count,
        )
        if sample.suite is Suite.SYNTHETIC:
            fn = eval_synthetic_text if direction.basis is Basis.TEXT else eval_synthetic_image
            outcome = fn(sample, table, scorer_id, direction.orientation)
            rows.append(
                EvaluationRow(
                    **common,
                    result=outcome.result,
                    selected_index=outcome.selected_index,
                    margin=outcome.margin,
                )
            )
        else:
            fn = eval_human_text if direction.basis is Basis.TEXT else eval_human_image
            ratio = fn(sample, table, scorer_id, direction.orientation)
            rows.append(
                EvaluationRow(
                    **common,
                    ratio=ratio.ratio,
                    wins=ratio.wins,
                    ties=ratio.ties,
                    comparisons=ratio.comparisons,
                )
            )
    return rows


def evaluate_samples(
    samples, table: ScoreTable, scorer_id: str, directions=ALL_DIRECTIONS
) -> list[EvaluationRow]:
    rows: list[EvaluationRow] = []
    for sample in samples:
        rows.extend(evaluate_sample(sample, table, scorer_id, directions))
    return rows


@dataclass(frozen=True)
class Counts:
    passed: int = 0
    failed: int = 0
    tied: int = 0
    unusable: int = 0


DEFAULT_GROUP_KEYS = (
    "suite",
    "category",
    "scorer_id",
    "basis",
    "orientation",
    "text_model",
    "image_model",
)


@dataclass(frozen=True)
class AggregateResult:
    group: tuple[tuple[str, str], ...]  # (key, value) pairs, fixed order
    suite: Suite
    raw_accuracy: float | None
    baseline: float | None
    scaled_accuracy: float | None
    counts: Counts
    n_samples: int
    n_usable: int

    def group_dict(self) -> dict[str, str]:
        return dict(self.group)


def _row_group(row: EvaluationRow, keys) -> tuple[tuple[str, str], ...]:
    values = []
    for key in keys:
        value = getattr(row, key)
        values.append((key, value.value if isinstance(value, Enum) else str(value)))
    return tuple(values)


def aggregate(
    rows: list[EvaluationRow], group_keys=DEFAULT_GROUP_KEYS
) -> list[AggregateResult]:
    """Aggregate evaluation rows per group.

    Synthetic groups report pass/(pass+fail+tie) over usable samples, with
    the analytic baseline for the group's image count. Human-supervised
    groups report the mean of per-prompt ratios (prompt-equal weighting)
    against a 0.5 baseline; their counts tally the underlying comparisons.
    Unusable samples are excluded from every denominator but counted.
    """
    buckets: dict[tuple, list[EvaluationRow]] = defaultdict(list)
    for row in rows:
        buckets[_row_group(row, group_keys)].append(row)

    results = []
    for group in sorted(buckets):
        members = buckets[group]
        suite = members[0].suite
        basis = members[0].basis
        usable = [r for r in members if r.usable]
        n_unusable = len(members) - len(usable)

        if suite is Suite.SYNTHETIC:
            passed = sum(1 for r in usable if r.result is Result.PASS)
            failed = sum(1 for r in usable if r.result is Result.FAIL)
            tied = sum(1 for r in usable if r.result is Result.TIE)
            counts = Counts(passed, failed, tied, n_unusable)
            if usable:
                raw = passed / len(usable)
                baseline = sum(
                    random_baseline(basis, suite, r.n_images) for r in usable
                ) / len(usable)
                scaled = scale_accuracy(raw, baseline)
            else:
                raw = baseline = scaled = None
        else:
            counts = Counts(
                passed=sum(r.wins for r in usable),
                failed=sum(r.comparisons - r.wins - r.ties for r in usable),
                tied=sum(r.ties for r in usable),
                unusable=n_unusable,
            )
            if usable:
                raw = sum(r.ratio for r in usable) / len(usable)
                baseline = 0.5
                scaled = scale_accuracy(raw, baseline)
            else:
                raw = baseline = scaled = None

        results.append(
            AggregateResult(
                group=group,
                suite=suite,
                raw_accuracy=raw,
                baseline=baseline,
                scaled_accuracy=scaled,
                counts=counts,
                n_samples=len(members),
                n_usable=len(usable),
            )
        )
    return results


@dataclass(frozen=True)
class CellAverage:
    """Forward and inverse scaled accuracies of one cell, averaged."""

    group: tuple[tuple[str, str], ...]  # group minus orientation
    scaled_accuracy: float | None
    orientations: tuple[str, ...]


def cell_average(results) -> list[CellAverage]:
    """Average scaled accuracy over orientations within each remaining group."""
    cells: dict[tuple, list] = defaultdict(list)
    for result in results:
        key = tuple((k, v) for k, v in result.group if k != "orientation")
        cells[key].append(result)

    out = []
    for key in sorted(cells):
        members = cells[key]
        values = [r.scaled_accuracy for r in members if r.scaled_accuracy is not None]
        orientations = tuple(
            sorted(dict(r.group).get("orientation", "") for r in members)
        )
        avg = sum(values) / len(values) if values else None
        out.append(CellAverage(group=key, scaled_accuracy=avg, orientations=orientations))
    return out


def average_over_models(results) -> list[CellAverage]:
    """Average scaled accuracy across generator-model pairs per remaining group."""
    cells: dict[tuple, list] = defaultdict(list)
    for result in results:
        key = tuple(
            (k, v) for k, v in result.group if k not in ("text_model", "image_model")
        )
        cells[key].append(result)
    out = []
    for key in sorted(cells):
        values = [
            r.scaled_accuracy for r in cells[key] if r.scaled_accuracy is not None
        ]
        avg = sum(values) / len(values) if values else None
        out.append(CellAverage(group=key, scaled_accuracy=avg, orientations=()))
    return out
