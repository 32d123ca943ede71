"""Deterministic fixtures: score-table walkthroughs and bulk synthetic samples.

The walkthrough fixtures freeze two fully worked examples (one synthetic
argmax comparison, one human-supervised cross-product ratio) with known
expected outcomes; ``build_micro_fixture`` materializes them as a small run
directory with real image files for the CLI. The bulk generator produces
in-memory samples for Monte-Carlo and property tests without touching disk.
"""

from __future__ import annotations

from pathlib import Path

from .dataset import (
    ImageReview,
    ImageStore,
    Manifest,
    Provenance,
    ReviewStatus,
    SamplePair,
    Suite,
    VerificationState,
    write_manifest,
)
from .pipeline import ImageRecord, ImageSet, PromptPair, Side
from .scoring import ScoreTable
from .utils import bytes_digest, png_bytes, stable_key, text_digest

FIXTURE_SCORER = "fixture-metric"
FIXTURE_TEXT_MODEL = "fixture-llm"
FIXTURE_IMAGE_MODEL = "fixture-t2i"

# Worked synthetic example: five images per side, argmax picks image index 1
# (value 14.4), which loses 14.4 vs 14.7, so forward text-based must FAIL.
WALKTHROUGH_ORIGINAL_TEXT = "A red steam locomotive in a mountain valley."
WALKTHROUGH_CONTRAST_TEXT = "A blue steam locomotive in a mountain valley."
WALKTHROUGH_SCORES = {
    ("original", "original"): (13.9, 14.4, 14.1, 13.7, 12.8),
    ("contrast", "original"): (14.3, 14.7, 14.6, 14.6, 13.7),
    ("original", "contrast"): (14.9, 15.2, 15.7, 13.9, 14.6),
    ("contrast", "contrast"): (12.7, 13.0, 13.9, 11.7, 12.5),
}

# Worked human-supervised example: two accepted images per side; the four
# cross comparisons split 2/4 for the forward image-based ratio.
HUMAN_ORIGINAL_TEXT = "A hand with a red index finger."
HUMAN_CONTRAST_TEXT = "A hand with a red ring finger."
HUMAN_SCORES = {
    ("original", "original"): (18.3, 16.8),
    ("original", "contrast"): (17.2, 18.2),
    ("contrast", "original"): (17.0, 16.0),
    ("contrast", "contrast"): (18.0, 17.5),
}

_FIXED_TIMESTAMP = "2025-01-01T00:00:00Z"


def fake_image_record(tag: str, index: int, model: str = FIXTURE_IMAGE_MODEL) -> ImageRecord:
    """An image record with a synthetic content hash; file never written."""
    digest = stable_key("fixture-image", tag, index)
    return ImageRecord(
        image_id=f"{tag}-{index}",
        path=f"images/{digest[:2]}/{digest}.png",
        sha256=digest,
        image_model_id=model,
        seed=index,
    )


def _image_set(side: Side, tag: str, n: int) -> ImageSet:
    records = tuple(fake_image_record(f"{tag}-{side.value}", i) for i in range(n))
    return ImageSet(prompt_side=side, count=n, images=records)


def make_synthetic_sample(
    index: int,
    n: int = 5,
    category: str = "bulk",
    sample_id: str | None = None,
) -> SamplePair:
    tag = sample_id or f"syn-{category}-{index:06d}"
    return SamplePair(
        sample_id=tag,
        pair=PromptPair(
            original_text=f"original text {tag}",
            contrast_text=f"contrast text {tag}",
            text_model_id=FIXTURE_TEXT_MODEL,
        ),
        images_original=_image_set(Side.ORIGINAL, tag, n),
        images_contrast=_image_set(Side.CONTRAST, tag, n),
        suite=Suite.SYNTHETIC,
        category=category,
    )


def make_synthetic_samples(count: int, n: int = 5, category: str = "bulk") -> list[SamplePair]:
    return [make_synthetic_sample(i, n=n, category=category) for i in range(count)]


def _add_scores(
    table: ScoreTable,
    scorer_id: str,
    sample: SamplePair,
    values: dict[tuple[str, str], tuple[float, ...]],
) -> None:
    texts = {
        "original": sample.pair.original_text,
        "contrast": sample.pair.contrast_text,
    }
    sides = {
        "original": sample.images_original.images,
        "contrast": sample.images_contrast.images,
    }
    for (text_side, image_side), scores in values.items():
        th = text_digest(texts[text_side])
        for record, score in zip(sides[image_side], scores):
            table.add(scorer_id, th, record.sha256, score)


def walkthrough_synthetic_sample(sample_id: str = "walkthrough-syn") -> SamplePair:
    return SamplePair(
        sample_id=sample_id,
        pair=PromptPair(
            original_text=WALKTHROUGH_ORIGINAL_TEXT,
            contrast_text=WALKTHROUGH_CONTRAST_TEXT,
            text_model_id=FIXTURE_TEXT_MODEL,
        ),
        images_original=_image_set(Side.ORIGINAL, sample_id, 5),
        images_contrast=_image_set(Side.CONTRAST, sample_id, 5),
        suite=Suite.SYNTHETIC,
        category="attribute/color/red",
    )


def walkthrough_human_sample(sample_id: str = "walkthrough-hum") -> SamplePair:
    original = _image_set(Side.ORIGINAL, sample_id, 2)
    contrast = _image_set(Side.CONTRAST, sample_id, 2)
    reviews = tuple(
        sorted(
            (
                record.image_id,
                ImageReview(
                    status=ReviewStatus.ACCEPTED,
                    reviewer="curator",
                    timestamp=_FIXED_TIMESTAMP,
                ),
            )
            for record in original.images + contrast.images
        )
    )
    return SamplePair(
        sample_id=sample_id,
        pair=PromptPair(
            original_text=HUMAN_ORIGINAL_TEXT,
            contrast_text=HUMAN_CONTRAST_TEXT,
            text_model_id=FIXTURE_TEXT_MODEL,
        ),
        images_original=original,
        images_contrast=contrast,
        suite=Suite.HUMAN_SUPERVISED,
        category="body_parts",
        verification=VerificationState(reviews=reviews),
    )


def walkthrough_table(scorer_id: str = FIXTURE_SCORER) -> ScoreTable:
    """Score table covering both walkthrough samples."""
    table = ScoreTable(provenance={scorer_id: "fixture"})
    _add_scores(table, scorer_id, walkthrough_synthetic_sample(), WALKTHROUGH_SCORES)
    _add_scores(table, scorer_id, walkthrough_human_sample(), HUMAN_SCORES)
    return table


def build_micro_fixture(dest: Path | str) -> None:
    """Write the walkthrough samples as a self-contained run directory.

    Produces manifest.json, the referenced PNG files, and scores.json for
    the fixture scorer. Deterministic byte-for-byte.
    """
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    store = ImageStore(dest)

    def materialize(sample: SamplePair) -> SamplePair:
        def store_side(image_set: ImageSet, shade: int) -> ImageSet:
            records = []
            for i, record in enumerate(image_set.images):
                data = png_bytes(8, 8, (shade, (37 * i) % 256, (11 * i + 50) % 256))
                relpath = store.put(data)
                records.append(
                    ImageRecord(
                        image_id=record.image_id,
                        path=relpath,
                        sha256=bytes_digest(data),
                        image_model_id=record.image_model_id,
                        seed=record.seed,
                    )
                )
            return ImageSet(
                prompt_side=image_set.prompt_side,
                count=image_set.count,
                images=tuple(records),
            )

        shade = 40 if sample.suite is Suite.SYNTHETIC else 200
        return SamplePair(
            sample_id=sample.sample_id,
            pair=sample.pair,
            images_original=store_side(sample.images_original, shade),
            images_contrast=store_side(sample.images_contrast, shade + 15),
            suite=sample.suite,
            category=sample.category,
            verification=sample.verification,
        )

    synthetic = materialize(walkthrough_synthetic_sample())
    human = materialize(walkthrough_human_sample())
    manifest = Manifest(
        provenance=Provenance(
            text_models=(FIXTURE_TEXT_MODEL,),
            image_models=(FIXTURE_IMAGE_MODEL,),
            taxonomy_version="fixture",
            seed=0,
        ),
        samples=(synthetic, human),
    )
    write_manifest(manifest, dest / "manifest.json")

    table = ScoreTable(provenance={FIXTURE_SCORER: "fixture"})
    _add_scores(table, FIXTURE_SCORER, synthetic, WALKTHROUGH_SCORES)
    _add_scores(table, FIXTURE_SCORER, human, HUMAN_SCORES)
    table.save(dest / "scores.json")
