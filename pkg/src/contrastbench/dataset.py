"""Dataset manifest: samples, image references, and verification state.

The manifest is a single JSON file with stable key order, written atomically
(temp file + rename) so concurrent readers always see a complete snapshot.
Images live on disk in a content-addressed tree next to the manifest; the
manifest stores relative paths plus content hashes, and the hashes key the
score cache so re-scoring survives file moves.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .pipeline import ImageRecord, ImageSet, PromptPair, Side
from .taxonomy import GenerationSpec, PromptType
from .utils import atomic_write_bytes, atomic_write_text, bytes_digest, canonical_json

MANIFEST_VERSION = "1"


class Suite(str, Enum):
    SYNTHETIC = "synthetic"
    HUMAN_SUPERVISED = "human_supervised"


class ReviewStatus(str, Enum):
    UNREVIEWED = "unreviewed"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class ManifestError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


@dataclass(frozen=True)
class ImageReview:
    status: ReviewStatus = ReviewStatus.UNREVIEWED
    reviewer: str | None = None
    timestamp: str | None = None


@dataclass(frozen=True)
class VerificationState:
    reviews: tuple[tuple[str, ImageReview], ...] = ()

    def status_of(self, image_id: str) -> ReviewStatus:
        for key, review in self.reviews:
            if key == image_id:
                return review.status
        return ReviewStatus.UNREVIEWED

    def with_review(self, image_id: str, review: ImageReview) -> "VerificationState":
        kept = tuple((k, r) for k, r in self.reviews if k != image_id)
        return VerificationState(reviews=tuple(sorted(kept + ((image_id, review),))))


@dataclass(frozen=True)
class SamplePair:
    sample_id: str
    pair: PromptPair
    images_original: ImageSet
    images_contrast: ImageSet
    suite: Suite
    category: str
    verification: VerificationState = VerificationState()
    # Image model the generation stage should use; set before images exist.
    image_model_hint: str = ""

    @property
    def text_model(self) -> str:
        return self.pair.text_model_id

    @property
    def image_model(self) -> str:
        models = sorted(
            {r.image_model_id for r in self.images_original.images}
            | {r.image_model_id for r in self.images_contrast.images}
        )
        return "+".join(models) if models else self.image_model_hint


@dataclass(frozen=True)
class Provenance:
    text_models: tuple[str, ...] = ()
    image_models: tuple[str, ...] = ()
    taxonomy_version: str = ""
    seed: int = 0


@dataclass(frozen=True)
class Manifest:
    version: str = MANIFEST_VERSION
    provenance: Provenance = Provenance()
    samples: tuple[SamplePair, ...] = ()

    def sample_by_id(self, sample_id: str) -> SamplePair | None:
        for sample in self.samples:
            if sample.sample_id == sample_id:
                return sample
        return None


class ImageStore:
    """Content-addressed PNG/JPEG storage under <root>/images."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def put(self, data: bytes, suffix: str = ".png") -> str:
        digest = bytes_digest(data)
        relpath = f"images/{digest[:2]}/{digest}{suffix}"
        target = self.root / relpath
        if not target.exists():
            atomic_write_bytes(target, data)
        return relpath

    def read(self, relpath: str) -> bytes:
        return (self.root / relpath).read_bytes()

    def absolute(self, relpath: str) -> Path:
        return self.root / relpath


# ---------------------------------------------------------------------------
# JSON (de)serialization


def _spec_to_json(spec: GenerationSpec | None) -> dict | None:
    if spec is None:
        return None
    return {
        "prompt_type": spec.prompt_type.value,
        "subject_topic": spec.subject_topic,
        "property": spec.property,
        "entity": spec.entity,
        "alt_topic": spec.alt_topic,
        "model_guide_id": spec.model_guide_id,
    }


def _spec_from_json(raw: dict | None) -> GenerationSpec | None:
    if raw is None:
        return None
    return GenerationSpec(
        prompt_type=PromptType(raw["prompt_type"]),
        subject_topic=raw["subject_topic"],
        property=raw.get("property"),
        entity=raw.get("entity"),
        alt_topic=raw.get("alt_topic"),
        model_guide_id=raw.get("model_guide_id", "default"),
    )


def _pair_to_json(pair: PromptPair) -> dict:
    return {
        "original_text": pair.original_text,
        "contrast_text": pair.contrast_text,
        "varied_definition": pair.varied_definition,
        "text_model_id": pair.text_model_id,
        "raw_response": pair.raw_response,
        "contrast_image_text": pair.contrast_image_text,
        "spec": _spec_to_json(pair.spec),
    }


def _pair_from_json(raw: dict) -> PromptPair:
    return PromptPair(
        original_text=raw["original_text"],
        contrast_text=raw["contrast_text"],
        varied_definition=raw.get("varied_definition"),
        text_model_id=raw.get("text_model_id", ""),
        raw_response=raw.get("raw_response", ""),
        contrast_image_text=raw.get("contrast_image_text"),
        spec=_spec_from_json(raw.get("spec")),
    )


def _image_set_to_json(images: ImageSet) -> dict:
    return {
        "prompt_side": images.prompt_side.value,
        "count": images.count,
        "images": [dataclasses.asdict(r) for r in images.images],
    }


def _image_set_from_json(raw: dict) -> ImageSet:
    return ImageSet(
        prompt_side=Side(raw["prompt_side"]),
        count=raw["count"],
        images=tuple(ImageRecord(**r) for r in raw["images"]),
    )


def _verification_to_json(state: VerificationState) -> dict:
    return {
        image_id: {
            "status": review.status.value,
            "reviewer": review.reviewer,
            "timestamp": review.timestamp,
        }
        for image_id, review in state.reviews
    }


def _verification_from_json(raw: dict) -> VerificationState:
    reviews = tuple(
        sorted(
            (
                image_id,
                ImageReview(
                    status=ReviewStatus(entry["status"]),
                    reviewer=entry.get("reviewer"),
                    timestamp=entry.get("timestamp"),
                ),
            )
            for image_id, entry in raw.items()
        )
    )
    return VerificationState(reviews=reviews)


def _sample_to_json(sample: SamplePair) -> dict:
    return {
        "sample_id": sample.sample_id,
        "suite": sample.suite.value,
        "category": sample.category,
        "image_model_hint": sample.image_model_hint,
        "pair": _pair_to_json(sample.pair),
        "images_original": _image_set_to_json(sample.images_original),
        "images_contrast": _image_set_to_json(sample.images_contrast),
        "verification": _verification_to_json(sample.verification),
    }


def _sample_from_json(raw: dict) -> SamplePair:
    return SamplePair(
        sample_id=raw["sample_id"],
        suite=Suite(raw["suite"]),
        category=raw["category"],
        image_model_hint=raw.get("image_model_hint", ""),
        pair=_pair_from_json(raw["pair"]),
        images_original=_image_set_from_json(raw["images_original"]),
        images_contrast=_image_set_from_json(raw["images_contrast"]),
        verification=_verification_from_json(raw.get("verification", {})),
    )


def manifest_to_json(manifest: Manifest) -> dict:
    return {
        "version": manifest.version,
        "provenance": {
            "text_models": list(manifest.provenance.text_models),
            "image_models": list(manifest.provenance.image_models),
            "taxonomy_version": manifest.provenance.taxonomy_version,
            "seed": manifest.provenance.seed,
        },
        "samples": [
            _sample_to_json(s)
            for s in sorted(manifest.samples, key=lambda s: s.sample_id)
        ],
    }


def manifest_from_json(raw: dict) -> Manifest:
    prov = raw.get("provenance", {})
    return Manifest(
        version=raw.get("version", MANIFEST_VERSION),
        provenance=Provenance(
            text_models=tuple(prov.get("text_models", ())),
            image_models=tuple(prov.get("image_models", ())),
            taxonomy_version=prov.get("taxonomy_version", ""),
            seed=prov.get("seed", 0),
        ),
        samples=tuple(_sample_from_json(s) for s in raw.get("samples", ())),
    )


# ---------------------------------------------------------------------------
# Validation, writing, filtering


def validate_manifest(manifest: Manifest, root: Path | None = None) -> list[str]:
    """Return every violated invariant (empty list when valid).

    When root is given, referenced image files must exist below it.
    """
    violations: list[str] = []
    seen_samples: set[str] = set()
    seen_images: set[str] = set()

    for sample in manifest.samples:
        sid = sample.sample_id
        if sid in seen_samples:
            violations.append(f"duplicate sample_id {sid!r}")
        seen_samples.add(sid)

        if not sample.pair.original_text or not sample.pair.contrast_text:
            violations.append(f"sample {sid!r}: empty prompt text")
        elif sample.pair.original_text == sample.pair.contrast_text:
            violations.append(f"sample {sid!r}: original and contrast texts are equal")

        if sample.suite is Suite.SYNTHETIC:
            if sample.images_original.count != sample.images_contrast.count:
                violations.append(
                    f"sample {sid!r}: synthetic sample with unequal image counts"
                )

        image_ids = set()
        for image_set in (sample.images_original, sample.images_contrast):
            for record in image_set.images:
                if record.image_id in seen_images:
                    violations.append(f"duplicate image_id {record.image_id!r}")
                seen_images.add(record.image_id)
                image_ids.add(record.image_id)
                if root is not None and not (root / record.path).exists():
                    violations.append(
                        f"sample {sid!r}: missing image file {record.path!r}"
                    )
        for image_id, _ in sample.verification.reviews:
            if image_id not in image_ids:
                violations.append(
                    f"sample {sid!r}: verification entry for unknown image {image_id!r}"
                )
    return violations


def write_manifest(manifest: Manifest, path: Path | str) -> None:
    """Validate and atomically write the manifest."""
    path = Path(path)
    violations = validate_manifest(manifest, root=path.parent)
    if violations:
        raise ManifestError(violations)
    atomic_write_text(path, canonical_json(manifest_to_json(manifest)))


def read_manifest(path: Path | str, validate: bool = True) -> Manifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ManifestError([f"cannot read manifest {path}: {exc}"]) from exc
    manifest = manifest_from_json(raw)
    if validate:
        violations = validate_manifest(manifest, root=path.parent)
        if violations:
            raise ManifestError(violations)
    return manifest


def _accepted_only(sample: SamplePair, image_set: ImageSet) -> ImageSet:
    kept = tuple(
        r
        for r in image_set.images
        if sample.verification.status_of(r.image_id) is ReviewStatus.ACCEPTED
    )
    return dataclasses.replace(image_set, images=kept)


def filter_for_evaluation(manifest: Manifest, suite: Suite) -> list[SamplePair]:
    """Samples of the suite as the evaluation engine may see them.

    Human-supervised samples keep only accepted images and are dropped when
    either side ends up empty; synthetic samples pass through unfiltered.
    Rejected images never reach evaluation.
    """
    out: list[SamplePair] = []
    for sample in manifest.samples:
        if sample.suite is not suite:
            continue
        if suite is Suite.SYNTHETIC:
            out.append(sample)
            continue
        original = _accepted_only(sample, sample.images_original)
        contrast = _accepted_only(sample, sample.images_contrast)
        if not original.images or not contrast.images:
            continue
        out.append(
            dataclasses.replace(
                sample, images_original=original, images_contrast=contrast
            )
        )
    return out
