"""Build a demo run directory for the annotation workflow.

Creates N human-supervised samples with a small number of images per side,
all unreviewed, so the annotation service has filtering and rating work.

Usage: python scripts/make_annotation_demo.py <dest> [n_samples] [images_per_side]
"""

import sys
from pathlib import Path

from contrastbench.dataset import (
    ImageStore,
    Manifest,
    Provenance,
    SamplePair,
    Suite,
    write_manifest,
)
from contrastbench.pipeline import ImageRecord, ImageSet, PromptPair, Side
from contrastbench.utils import bytes_digest, png_bytes


def build(dest: Path, n_samples: int = 15, per_side: int = 2) -> None:
    store = ImageStore(dest)
    samples = []
    for index in range(n_samples):

        def make_side(side: Side, shade: int) -> ImageSet:
            records = []
            for j in range(per_side):
                data = png_bytes(
                    8, 8, (shade, (index * 17 + j * 41) % 256, (index * 29 + j * 7) % 256)
                )
                records.append(
                    ImageRecord(
                        image_id=f"demo-{index:04d}--{side.value}-{j}",
                        path=store.put(data),
                        sha256=bytes_digest(data),
                        image_model_id="fixture-t2i",
                        seed=j,
                    )
                )
            return ImageSet(prompt_side=side, count=per_side, images=tuple(records))

        samples.append(
            SamplePair(
                sample_id=f"demo-{index:04d}",
                pair=PromptPair(
                    original_text=f"Scene number {index} in its usual form.",
                    contrast_text=f"Scene number {index} in an unusual form.",
                    text_model_id="authored",
                ),
                images_original=make_side(Side.ORIGINAL, 60),
                images_contrast=make_side(Side.CONTRAST, 200),
                suite=Suite.HUMAN_SUPERVISED,
                category=f"demo-cat-{index % 3}",
            )
        )
    write_manifest(
        Manifest(provenance=Provenance(seed=0), samples=tuple(samples)),
        dest / "manifest.json",
    )
    print(f"wrote {len(samples)} samples to {dest / 'manifest.json'}")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    build(
        Path(sys.argv[1]),
        int(sys.argv[2]) if len(sys.argv) > 2 else 15,
        int(sys.argv[3]) if len(sys.argv) > 3 else 2,
    )
