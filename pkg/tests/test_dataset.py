import dataclasses
import threading

import pytest

from contrastbench.dataset import (
    ImageReview,
    ImageStore,
    Manifest,
    ManifestError,
    Provenance,
    ReviewStatus,
    Suite,
    filter_for_evaluation,
    read_manifest,
    write_manifest,
)
from contrastbench.fixtures import (
    make_synthetic_sample,
    walkthrough_human_sample,
    walkthrough_synthetic_sample,
)
from contrastbench.pipeline import ImageSet, Side
from contrastbench.utils import bytes_digest, png_bytes


def materialized_sample(tmp_path, sample):
    """Replace fixture records with real files so validation passes."""
    store = ImageStore(tmp_path)

    def fill(image_set, shade):
        records = []
        for i, record in enumerate(image_set.images):
            data = png_bytes(4, 4, (shade, i * 30 % 256, 99))
            relpath = store.put(data)
            records.append(
                dataclasses.replace(record, path=relpath, sha256=bytes_digest(data))
            )
        return dataclasses.replace(image_set, images=tuple(records))

    return dataclasses.replace(
        sample,
        images_original=fill(sample.images_original, 10),
        images_contrast=fill(sample.images_contrast, 160),
    )


@pytest.fixture
def manifest_on_disk(tmp_path):
    samples = (
        materialized_sample(tmp_path, walkthrough_synthetic_sample()),
        materialized_sample(tmp_path, walkthrough_human_sample()),
    )
    manifest = Manifest(
        provenance=Provenance(
            text_models=("fixture-llm",),
            image_models=("fixture-t2i",),
            taxonomy_version="test",
            seed=3,
        ),
        samples=samples,
    )
    path = tmp_path / "manifest.json"
    write_manifest(manifest, path)
    return manifest, path


def test_round_trip_identity(manifest_on_disk):
    manifest, path = manifest_on_disk
    again = read_manifest(path)
    assert again == dataclasses.replace(
        manifest, samples=tuple(sorted(manifest.samples, key=lambda s: s.sample_id))
    )


def test_round_trip_preserves_timestamps(manifest_on_disk, tmp_path):
    manifest, path = manifest_on_disk
    sample = manifest.sample_by_id("walkthrough-hum")
    image_id = sample.images_original.images[0].image_id
    updated = dataclasses.replace(
        sample,
        verification=sample.verification.with_review(
            image_id,
            ImageReview(
                status=ReviewStatus.REJECTED,
                reviewer="alice",
                timestamp="2025-06-30T12:34:56+00:00",
            ),
        ),
    )
    manifest = dataclasses.replace(
        manifest,
        samples=tuple(
            updated if s.sample_id == sample.sample_id else s for s in manifest.samples
        ),
    )
    write_manifest(manifest, path)
    again = read_manifest(path)
    review = dict(again.sample_by_id("walkthrough-hum").verification.reviews)[image_id]
    assert review.timestamp == "2025-06-30T12:34:56+00:00"
    assert review.reviewer == "alice"
    assert review.status is ReviewStatus.REJECTED


def test_missing_image_file_names_sample(manifest_on_disk, tmp_path):
    manifest, path = manifest_on_disk
    sample = manifest.samples[0]
    broken_record = dataclasses.replace(
        sample.images_original.images[0], path="images/zz/gone.png"
    )
    broken = dataclasses.replace(
        sample,
        images_original=dataclasses.replace(
            sample.images_original,
            images=(broken_record,) + sample.images_original.images[1:],
        ),
    )
    bad = dataclasses.replace(
        manifest,
        samples=tuple(
            broken if s.sample_id == sample.sample_id else s for s in manifest.samples
        ),
    )
    with pytest.raises(ManifestError) as exc_info:
        write_manifest(bad, path)
    assert sample.sample_id in str(exc_info.value)


def test_validation_lists_all_violations(tmp_path):
    sample = make_synthetic_sample(0, n=2)
    dup = dataclasses.replace(sample)  # same sample_id twice
    unequal = dataclasses.replace(
        make_synthetic_sample(1, n=2),
        images_contrast=ImageSet(Side.CONTRAST, 3),
    )
    manifest = Manifest(samples=(sample, dup, unequal))
    with pytest.raises(ManifestError) as exc_info:
        write_manifest(manifest, tmp_path / "m.json")
    violations = exc_info.value.violations
    assert any("duplicate sample_id" in v for v in violations)
    assert any("unequal image counts" in v for v in violations)
    assert len(violations) > 2  # duplicate image ids are reported too


def test_atomic_concurrent_writers(tmp_path):
    path = tmp_path / "manifest.json"
    base = make_synthetic_sample(0, n=1)
    store = ImageStore(tmp_path)

    def filled(tag):
        def fill(image_set, shade):
            records = []
            for i, record in enumerate(image_set.images):
                data = png_bytes(4, 4, (shade, i, 0))
                records.append(
                    dataclasses.replace(
                        record, path=store.put(data), sha256=bytes_digest(data)
                    )
                )
            return dataclasses.replace(image_set, images=tuple(records))

        return dataclasses.replace(
            base,
            sample_id=f"sample-{tag}",
            images_original=fill(base.images_original, 10),
            images_contrast=fill(base.images_contrast, 200),
        )

    manifests = [Manifest(samples=(filled(tag),)) for tag in ("a", "b")]
    errors = []

    def writer(manifest):
        try:
            for _ in range(25):
                write_manifest(manifest, path)
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=writer, args=(m,)) for m in manifests]
    for t in threads:
        t.start()
    # Interleaved reads must always see a complete, parseable manifest.
    for _ in range(50):
        if path.exists():
            manifest = read_manifest(path)
            assert len(manifest.samples) == 1
    for t in threads:
        t.join()
    assert not errors
    final = read_manifest(path)
    assert final.samples[0].sample_id in ("sample-a", "sample-b")


def test_filter_keeps_only_accepted(tmp_path):
    sample = walkthrough_human_sample()
    reject_id = sample.images_original.images[0].image_id
    sample = dataclasses.replace(
        sample,
        verification=sample.verification.with_review(
            reject_id, ImageReview(status=ReviewStatus.REJECTED)
        ),
    )
    manifest = Manifest(samples=(sample,))
    filtered = filter_for_evaluation(manifest, Suite.HUMAN_SUPERVISED)
    assert len(filtered) == 1
    kept = filtered[0]
    assert len(kept.images_original.images) == 1
    assert len(kept.images_contrast.images) == 2
    kept_ids = {r.image_id for r in kept.images_original.images}
    assert reject_id not in kept_ids


def test_filter_drops_sample_with_empty_side():
    sample = walkthrough_human_sample()
    verification = sample.verification
    for record in sample.images_contrast.images:
        verification = verification.with_review(
            record.image_id, ImageReview(status=ReviewStatus.REJECTED)
        )
    sample = dataclasses.replace(sample, verification=verification)
    manifest = Manifest(samples=(sample,))
    assert filter_for_evaluation(manifest, Suite.HUMAN_SUPERVISED) == []


def test_filter_passes_synthetic_through():
    sample = walkthrough_synthetic_sample()
    manifest = Manifest(samples=(sample,))
    filtered = filter_for_evaluation(manifest, Suite.SYNTHETIC)
    assert filtered == [sample]


def test_unreviewed_human_images_do_not_reach_evaluation():
    sample = walkthrough_human_sample()
    # wipe all reviews: everything unreviewed
    sample = dataclasses.replace(sample, verification=sample.verification.__class__())
    manifest = Manifest(samples=(sample,))
    assert filter_for_evaluation(manifest, Suite.HUMAN_SUPERVISED) == []


def test_image_store_roundtrip_and_dedupe(tmp_path):
    store = ImageStore(tmp_path)
    data = png_bytes(6, 6, (1, 2, 3))
    p1 = store.put(data)
    p2 = store.put(data)
    assert p1 == p2
    assert store.read(p1) == data
    assert bytes_digest(data) in p1
