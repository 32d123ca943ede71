"""Run orchestration: generate, score, evaluate, report against a run directory.

Every stage is idempotent against the manifest: re-running skips work whose
results already exist, so interrupted runs resume cleanly and repeated runs
with stub clients are byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from pathlib import Path

from . import evaluation
from .clients import make_image_client, make_text_client
from .config import ModelEndpoint, RunConfig
from .dataset import (
    ImageStore,
    Manifest,
    Provenance,
    SamplePair,
    Suite,
    filter_for_evaluation,
    read_manifest,
    write_manifest,
)
from .pipeline import (
    ImageRecord,
    ImageSet,
    PromptPair,
    Side,
    generate_images,
    generate_prompt_pairs,
)
from .scoring import ScoreTable, sample_score_requests, score_pairs
from .taxonomy import (
    GenerationSpec,
    Taxonomy,
    load_bundled_taxonomy,
    load_taxonomy,
    sample_combinations,
)
from .utils import atomic_write_text, bytes_digest, canonical_json


class StageError(RuntimeError):
    pass


def _load_tax(config: RunConfig) -> Taxonomy:
    if config.taxonomy == "bundled":
        return load_bundled_taxonomy()
    return load_taxonomy(config.taxonomy)


def _read_or_empty_manifest(config: RunConfig, tax_version: str) -> Manifest:
    if config.manifest_path.exists():
        return read_manifest(config.manifest_path)
    return Manifest(
        provenance=Provenance(
            text_models=tuple(m.model_id for m in config.text_models),
            image_models=tuple(m.model_id for m in config.image_models),
            taxonomy_version=tax_version,
            seed=config.seed,
        )
    )


def _existing_spec_keys(
    manifest: Manifest, text_model: str, image_model: str
) -> set[str]:
    keys = set()
    for sample in manifest.samples:
        if sample.text_model == text_model and sample.image_model_hint == image_model:
            if sample.pair.spec is not None:
                keys.add(sample.pair.spec.key)
    return keys


def stage_gen_prompts(config: RunConfig) -> dict:
    """Create prompt pairs for every (text model, image model, spec) combo.

    Synthetic suites call the text-generation service; human-supervised
    suites ingest the authored prompts file. Existing samples are skipped.
    """
    tax = _load_tax(config)
    manifest = _read_or_empty_manifest(config, tax.version)

    if config.suite is Suite.HUMAN_SUPERVISED:
        return _ingest_human_prompts(config, manifest)

    if not config.text_models or not config.image_models:
        raise StageError("synthetic generation requires text_models and image_models")

    new_samples: list[SamplePair] = []
    rejections: dict[str, int] = {}
    failed_specs: list[str] = []
    skipped = 0

    for text_model in config.text_models:
        client = make_text_client(text_model.endpoint)
        for image_model in config.image_models:
            specs: list[GenerationSpec] = []
            for prompt_type in config.prompt_types:
                for spec in sample_combinations(
                    tax, prompt_type, config.seed, config.limits
                ):
                    specs.append(
                        dataclasses.replace(spec, model_guide_id=image_model.guide_id)
                    )
            existing = _existing_spec_keys(
                manifest, text_model.model_id, image_model.model_id
            )
            result = generate_prompt_pairs(
                specs,
                client,
                config.pairs_per_spec,
                tax=tax,
                text_model_id=text_model.model_id,
                existing_keys=existing,
                max_tokens=config.max_tokens,
                temperature=config.temperature,
            )
            skipped += result.skipped_specs
            failed_specs.extend(result.rejections.failed_specs)
            for reason, count in result.rejections.counts.items():
                rejections[reason] = rejections.get(reason, 0) + count

            per_spec_index: dict[str, int] = {}
            for pair in result.pairs:
                spec = pair.spec
                index = per_spec_index.get(spec.key, 0)
                per_spec_index[spec.key] = index + 1
                sample_id = (
                    f"{spec.key}__{text_model.model_id}"
                    f"__{image_model.model_id}__{index:02d}"
                )
                new_samples.append(
                    SamplePair(
                        sample_id=sample_id,
                        pair=pair,
                        images_original=ImageSet(Side.ORIGINAL, config.images_per_prompt),
                        images_contrast=ImageSet(Side.CONTRAST, config.images_per_prompt),
                        suite=Suite.SYNTHETIC,
                        category=spec.category,
                        image_model_hint=image_model.model_id,
                    )
                )

    manifest = dataclasses.replace(
        manifest, samples=manifest.samples + tuple(new_samples)
    )
    write_manifest(manifest, config.manifest_path)
    return {
        "stage": "gen-prompts",
        "new_samples": len(new_samples),
        "skipped_specs": skipped,
        "rejections": dict(sorted(rejections.items())),
        "failed_specs": sorted(failed_specs),
    }


def _ingest_human_prompts(config: RunConfig, manifest: Manifest) -> dict:
    """Read authored prompt rows (JSONL) into human-supervised samples."""
    rows = []
    for line in Path(config.prompts_file).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            rows.append(json.loads(line))

    existing_ids = {s.sample_id for s in manifest.samples}
    image_models = config.image_models or (ModelEndpoint("unassigned", "stub"),)
    new_samples = []
    for index, row in enumerate(rows):
        category = str(row.get("category", "uncategorized"))
        for image_model in image_models:
            sample_id = f"hum-{category}-{index:04d}__{image_model.model_id}"
            if sample_id in existing_ids:
                continue
            pair = PromptPair(
                original_text=str(row["original_text"]),
                contrast_text=str(row["contrast_text"]),
                text_model_id=str(row.get("source", "authored")),
                contrast_image_text=row.get("contrast_image_text"),
            )
            new_samples.append(
                SamplePair(
                    sample_id=sample_id,
                    pair=pair,
                    images_original=ImageSet(Side.ORIGINAL, config.images_per_prompt),
                    images_contrast=ImageSet(Side.CONTRAST, config.images_per_prompt),
                    suite=Suite.HUMAN_SUPERVISED,
                    category=category,
                    image_model_hint=image_model.model_id,
                )
            )
    manifest = dataclasses.replace(
        manifest, samples=manifest.samples + tuple(new_samples)
    )
    write_manifest(manifest, config.manifest_path)
    return {
        "stage": "gen-prompts",
        "new_samples": len(new_samples),
        "skipped_specs": len(rows) * len(image_models) - len(new_samples),
        "rejections": {},
        "failed_specs": [],
    }


def stage_gen_images(config: RunConfig) -> dict:
    """Generate the configured number of images per prompt side.

    Samples whose sides are already complete are skipped. Negation-style
    samples condition the contrast side on pair.contrast_image_text while
    the stored contrast text stays unchanged.
    """
    manifest = read_manifest(config.manifest_path)
    store = ImageStore(config.output_dir)
    clients = {
        m.model_id: make_image_client(m.endpoint) for m in config.image_models
    }

    generated = 0
    skipped = 0
    unusable: list[str] = []
    samples = []
    for sample in manifest.samples:
        n = sample.images_original.count
        complete = (
            len(sample.images_original.images) == n
            and len(sample.images_contrast.images) == n
        )
        if complete:
            skipped += 1
            samples.append(sample)
            continue
        client = clients.get(sample.image_model_hint)
        if client is None:
            raise StageError(
                f"sample {sample.sample_id!r} wants image model "
                f"{sample.image_model_hint!r} which is not configured"
            )
        negation = sample.pair.contrast_image_text is not None
        original, contrast = generate_images(
            sample.pair,
            client,
            n,
            negation_mode=negation,
            alt_text=sample.pair.contrast_image_text,
            image_model_id=sample.image_model_hint,
            store=store,
            sample_key=sample.sample_id,
            run_seed=config.seed,
            width=config.image_width,
            height=config.image_height,
        )
        if not original.usable or not contrast.usable:
            unusable.append(sample.sample_id)
        samples.append(
            dataclasses.replace(
                sample, images_original=original, images_contrast=contrast
            )
        )
        generated += len(original.images) + len(contrast.images)

    manifest = dataclasses.replace(manifest, samples=tuple(samples))
    write_manifest(manifest, config.manifest_path)
    return {
        "stage": "gen-images",
        "images_generated": generated,
        "samples_skipped": skipped,
        "unusable_samples": sorted(unusable),
    }


def _evaluation_samples(manifest: Manifest) -> list[SamplePair]:
    return filter_for_evaluation(manifest, Suite.SYNTHETIC) + filter_for_evaluation(
        manifest, Suite.HUMAN_SUPERVISED
    )


def stage_score(config: RunConfig) -> dict:
    """Fill the score table for every configured scorer; cache hits are free."""
    manifest = read_manifest(config.manifest_path)
    samples = _evaluation_samples(manifest)
    store = ImageStore(config.output_dir)

    table = (
        ScoreTable.load(config.scores_path)
        if config.scores_path.exists()
        else ScoreTable()
    )
    before = len(table)
    requests = [req for sample in samples for req in sample_score_requests(sample)]
    for scorer in config.scorers:
        table.provenance.setdefault(scorer.scorer_id, "v1")
        score_pairs(
            requests,
            scorer,
            table,
            samples=samples,
            bytes_loader=store.read,
        )
    table.save(config.scores_path)
    return {
        "stage": "score",
        "new_scores": len(table) - before,
        "total_scores": len(table),
        "failed_keys": table.failed_count(),
    }


def stage_evaluate(config: RunConfig) -> dict:
    """Run all four evaluation directions for every scorer and sample."""
    manifest = read_manifest(config.manifest_path)
    samples = _evaluation_samples(manifest)
    if not config.scores_path.exists():
        raise StageError("no scores.json; run the score stage first")
    table = ScoreTable.load(config.scores_path)

    rows = []
    for scorer in config.scorers:
        rows.extend(evaluation.evaluate_samples(samples, table, scorer.scorer_id))

    payload = [
        {
            "sample_id": r.sample_id,
            "suite": r.suite.value,
            "category": r.category,
            "scorer_id": r.scorer_id,
            "basis": r.basis.value,
            "orientation": r.orientation.value,
            "text_model": r.text_model,
            "image_model": r.image_model,
            "n_images": r.n_images,
            "result": r.result.value if r.result is not None else None,
            "selected_index": r.selected_index,
            "margin": r.margin,
            "ratio": r.ratio,
            "wins": r.wins,
            "ties": r.ties,
            "comparisons": r.comparisons,
        }
        for r in rows
    ]
    payload.sort(key=lambda d: (d["scorer_id"], d["sample_id"], d["basis"], d["orientation"]))
    atomic_write_text(config.outcomes_path, canonical_json(payload))
    usable = sum(
        1 for d in payload if d["result"] not in (None, "unusable") or d["ratio"] is not None
    )
    return {"stage": "evaluate", "rows": len(payload), "usable_rows": usable}


def _rows_from_outcomes(path: Path) -> list[evaluation.EvaluationRow]:
    raw = json.loads(path.read_text(encoding="utf-8"))
    rows = []
    for d in raw:
        rows.append(
            evaluation.EvaluationRow(
                sample_id=d["sample_id"],
                suite=Suite(d["suite"]),
                category=d["category"],
                scorer_id=d["scorer_id"],
                basis=evaluation.Basis(d["basis"]),
                orientation=evaluation.Orientation(d["orientation"]),
                text_model=d["text_model"],
                image_model=d["image_model"],
                n_images=d["n_images"],
                result=evaluation.Result(d["result"]) if d["result"] else None,
                selected_index=d["selected_index"],
                margin=d["margin"],
                ratio=d["ratio"],
                wins=d["wins"],
                ties=d["ties"],
                comparisons=d["comparisons"],
            )
        )
    return rows


def _format_float(value) -> str:
    return "" if value is None else f"{value:.6f}"


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def stage_report(config: RunConfig) -> dict:
    """Aggregate outcomes into direction tables and category-by-scorer grids."""
    if not config.outcomes_path.exists():
        raise StageError("no outcomes.json; run the evaluate stage first")
    rows = _rows_from_outcomes(config.outcomes_path)
    results = evaluation.aggregate(rows)
    config.report_dir.mkdir(parents=True, exist_ok=True)

    header = [
        "suite",
        "category",
        "scorer_id",
        "basis",
        "orientation",
        "text_model",
        "image_model",
        "n_samples",
        "n_usable",
        "pass",
        "fail",
        "tie",
        "unusable",
        "raw_accuracy",
        "baseline",
        "scaled_accuracy",
    ]
    table_rows = []
    for result in results:
        group = result.group_dict()
        table_rows.append(
            [
                group["suite"],
                group["category"],
                group["scorer_id"],
                group["basis"],
                group["orientation"],
                group["text_model"],
                group["image_model"],
                str(result.n_samples),
                str(result.n_usable),
                str(result.counts.passed),
                str(result.counts.failed),
                str(result.counts.tied),
                str(result.counts.unusable),
                _format_float(result.raw_accuracy),
                _format_float(result.baseline),
                _format_float(result.scaled_accuracy),
            ]
        )
    atomic_write_text(
        config.report_dir / "directions.csv", _csv_text(header, table_rows)
    )

    # Direction table averaged across generator-model pairs.
    model_avg = evaluation.average_over_models(results)
    avg_rows = [
        [*(v for _, v in cell.group), _format_float(cell.scaled_accuracy)]
        for cell in model_avg
    ]
    avg_header = [k for k, _ in model_avg[0].group] + ["scaled_accuracy"] if model_avg else []
    atomic_write_text(
        config.report_dir / "directions_model_avg.csv",
        _csv_text(avg_header, avg_rows),
    )

    # Category x scorer grid of forward/inverse cell averages, one per basis.
    cells = evaluation.cell_average(model_avg)
    grids: dict[str, dict[tuple[str, str], float | None]] = {}
    for cell in cells:
        group = dict(cell.group)
        grids.setdefault(group["basis"], {})[
            (group["category"], group["scorer_id"])
        ] = cell.scaled_accuracy
    grid_files = []
    for basis, values in sorted(grids.items()):
        categories = sorted({c for c, _ in values})
        scorers = sorted({s for _, s in values})
        rows_out = [
            [category]
            + [_format_float(values.get((category, scorer))) for scorer in scorers]
            for category in categories
        ]
        name = f"grid_{basis}.csv"
        atomic_write_text(
            config.report_dir / name, _csv_text(["category", *scorers], rows_out)
        )
        grid_files.append(name)

    summary = {
        "directions": [
            {
                **result.group_dict(),
                "n_samples": result.n_samples,
                "n_usable": result.n_usable,
                "counts": dataclasses.asdict(result.counts),
                "raw_accuracy": result.raw_accuracy,
                "baseline": result.baseline,
                "scaled_accuracy": result.scaled_accuracy,
            }
            for result in results
        ],
        "grids": {
            basis: {
                f"{category}|{scorer}": value
                for (category, scorer), value in sorted(values.items())
            }
            for basis, values in sorted(grids.items())
        },
    }
    atomic_write_text(config.report_dir / "summary.json", canonical_json(summary))
    return {
        "stage": "report",
        "direction_rows": len(results),
        "grids": grid_files,
        "report_dir": str(config.report_dir),
    }


def stage_import_images(
    config: RunConfig, sample_id: str, side: str, files: list[Path]
) -> dict:
    """Ingest externally produced images into a human-supervised sample side."""
    manifest = read_manifest(config.manifest_path)
    sample = manifest.sample_by_id(sample_id)
    if sample is None:
        raise StageError(f"no sample with id {sample_id!r}")
    if sample.suite is not Suite.HUMAN_SUPERVISED:
        raise StageError("import-images targets human-supervised samples only")
    if side not in ("original", "contrast"):
        raise StageError("side must be 'original' or 'contrast'")

    store = ImageStore(config.output_dir)
    image_set = (
        sample.images_original if side == "original" else sample.images_contrast
    )
    existing = len(image_set.images)
    records = list(image_set.images)
    for k, file_path in enumerate(files):
        data = Path(file_path).read_bytes()
        suffix = Path(file_path).suffix.lower() or ".png"
        relpath = store.put(data, suffix=suffix)
        records.append(
            ImageRecord(
                image_id=f"{sample_id}--{side}-ext-{existing + k}",
                path=relpath,
                sha256=bytes_digest(data),
                image_model_id="external",
                seed=0,
            )
        )
    new_set = dataclasses.replace(image_set, images=tuple(records))
    updated = dataclasses.replace(
        sample,
        images_original=new_set if side == "original" else sample.images_original,
        images_contrast=new_set if side == "contrast" else sample.images_contrast,
    )
    manifest = dataclasses.replace(
        manifest,
        samples=tuple(
            updated if s.sample_id == sample_id else s for s in manifest.samples
        ),
    )
    write_manifest(manifest, config.manifest_path)
    return {
        "stage": "import-images",
        "sample_id": sample_id,
        "side": side,
        "imported": len(files),
    }
