"""Contrastive prompt-pair and image generation.

Text models return free-form output; we extract the last well-formed JSON
object (reasoning models wrap their answer in thinking text) and either
build a validated PromptPair or a typed Rejection. Rejections are counted,
never repaired or guessed.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .clients import ClientError, ImageGenClient, TextGenClient, with_retries
from .taxonomy import GenerationSpec, PromptType, Taxonomy
from .templates import load_guide, render_template
from .utils import bytes_digest, derived_seed

MAX_PROMPT_TOKENS = 180  # whitespace-token heuristic


class Side(str, Enum):
    ORIGINAL = "original"
    CONTRAST = "contrast"


class RejectionReason(str, Enum):
    NO_OBJECT = "no_object"
    MISSING_KEY = "missing_key"
    EMPTY_FIELD = "empty_field"
    IDENTICAL_TEXTS = "identical_texts"
    TOO_LONG = "too_long"


@dataclass(frozen=True)
class Rejection:
    reason: RejectionReason
    detail: str = ""


@dataclass(frozen=True)
class PromptPair:
    original_text: str
    contrast_text: str
    spec: GenerationSpec | None = None
    varied_definition: str | None = None
    text_model_id: str = ""
    raw_response: str = ""
    # Set only for negation-style samples: the text the contrast images are
    # generated from, while contrast_text stays the evaluation text.
    contrast_image_text: str | None = None


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    path: str
    sha256: str
    image_model_id: str
    seed: int


@dataclass(frozen=True)
class ImageSet:
    prompt_side: Side
    count: int  # intended number of images; len(images) < count records holes
    images: tuple[ImageRecord, ...] = ()

    @property
    def usable(self) -> bool:
        return len(self.images) > 0


def _json_objects(raw: str):
    """Yield the top-level JSON objects embedded in raw, left to right."""
    decoder = json.JSONDecoder()
    i = 0
    while True:
        start = raw.find("{", i)
        if start < 0:
            return
        try:
            obj, end = decoder.raw_decode(raw, start)
        except ValueError:
            i = start + 1
            continue
        if isinstance(obj, dict):
            yield obj
        i = start + max(end - start, 1)


def parse_llm_output(
    raw: str,
    prompt_type: PromptType,
    spec: GenerationSpec | None = None,
    text_model_id: str = "",
) -> PromptPair | Rejection:
    """Extract a PromptPair from model output, or return a typed Rejection.

    Never raises on malformed input and never fabricates fields.
    """
    obj = None
    for candidate in _json_objects(raw):
        obj = candidate
    if obj is None:
        return Rejection(RejectionReason.NO_OBJECT)

    required = ["prompt", "contrast_prompt"]
    if prompt_type is PromptType.ENTITY_VARIATION:
        required.append("varied_definition")

    values: dict[str, str] = {}
    for key in required:
        if key not in obj:
            return Rejection(RejectionReason.MISSING_KEY, key)
        value = obj[key]
        if not isinstance(value, str) or not value.strip():
            return Rejection(RejectionReason.EMPTY_FIELD, key)
        values[key] = value.strip()

    if values["prompt"] == values["contrast_prompt"]:
        return Rejection(RejectionReason.IDENTICAL_TEXTS)
    for key in ("prompt", "contrast_prompt"):
        if len(values[key].split()) > MAX_PROMPT_TOKENS:
            return Rejection(RejectionReason.TOO_LONG, key)

    return PromptPair(
        original_text=values["prompt"],
        contrast_text=values["contrast_prompt"],
        spec=spec,
        varied_definition=values.get("varied_definition"),
        text_model_id=text_model_id,
        raw_response=raw,
    )


@dataclass
class RejectionStats:
    counts: Counter = field(default_factory=Counter)
    failed_specs: list[str] = field(default_factory=list)

    def record(self, rejection: Rejection) -> None:
        self.counts[rejection.reason.value] += 1


@dataclass
class GenerationResult:
    pairs: list[PromptPair]
    rejections: RejectionStats
    skipped_specs: int = 0


def generate_prompt_pairs(
    specs: list[GenerationSpec],
    client: TextGenClient,
    per_spec: int,
    *,
    tax: Taxonomy,
    text_model_id: str,
    guide_loader=load_guide,
    existing_keys: frozenset[str] | set[str] = frozenset(),
    max_tokens: int = 512,
    temperature: float = 1.0,
    retry_attempts: int = 3,
    retry_backoff: float = 0.5,
    sleep=None,
) -> GenerationResult:
    """Request per_spec completions per spec and parse them into pairs.

    Specs whose key is in existing_keys are skipped entirely (idempotent
    re-runs make no client calls for them). Transport failures are retried
    with exponential backoff; a spec that still fails is recorded in
    rejections.failed_specs and the run continues.
    """
    stats = RejectionStats()
    pairs: list[PromptPair] = []
    skipped = 0
    retry_kwargs = {"attempts": retry_attempts, "backoff": retry_backoff}
    if sleep is not None:
        retry_kwargs["sleep"] = sleep

    for spec in specs:
        if spec.key in existing_keys:
            skipped += 1
            continue
        prompt = render_template(spec, guide_loader(spec.model_guide_id), tax)
        try:
            completions = with_retries(
                lambda: client.complete(
                    text_model_id, prompt, max_tokens, temperature, per_spec
                ),
                **retry_kwargs,
            )
        except ClientError:
            stats.failed_specs.append(spec.key)
            continue
        for raw in completions:
            parsed = parse_llm_output(
                raw, spec.prompt_type, spec=spec, text_model_id=text_model_id
            )
            if isinstance(parsed, Rejection):
                stats.record(parsed)
            else:
                pairs.append(parsed)
    return GenerationResult(pairs=pairs, rejections=stats, skipped_specs=skipped)


def generate_images(
    pair: PromptPair,
    client: ImageGenClient,
    n: int,
    negation_mode: bool = False,
    alt_text: str | None = None,
    *,
    image_model_id: str,
    store,
    sample_key: str,
    run_seed: int = 0,
    width: int = 512,
    height: int = 512,
    retry_attempts: int = 3,
    retry_backoff: float = 0.5,
    sleep=None,
) -> tuple[ImageSet, ImageSet]:
    """Generate n images per side with recorded seeds.

    In negation mode the contrast side is conditioned on alt_text (the prompt
    with the negated part removed) while the pair's contrast_text remains the
    text used at evaluation time. Per-image failures leave holes; a side with
    zero images makes the sample unusable downstream.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if negation_mode and not alt_text:
        raise ValueError("negation_mode requires alt_text")

    retry_kwargs = {"attempts": retry_attempts, "backoff": retry_backoff}
    if sleep is not None:
        retry_kwargs["sleep"] = sleep

    conditioning = {
        Side.ORIGINAL: pair.original_text,
        Side.CONTRAST: alt_text if negation_mode else pair.contrast_text,
    }

    sets: dict[Side, ImageSet] = {}
    for side, text in conditioning.items():
        records = []
        for i in range(n):
            seed = derived_seed(run_seed, sample_key, side.value, i)
            try:
                data = with_retries(
                    lambda: client.generate(image_model_id, text, seed, width, height),
                    **retry_kwargs,
                )
            except ClientError:
                continue  # hole; recorded implicitly as a missing index
            relpath = store.put(data)
            records.append(
                ImageRecord(
                    image_id=f"{sample_key}--{side.value}-{i}",
                    path=relpath,
                    sha256=bytes_digest(data),
                    image_model_id=image_model_id,
                    seed=seed,
                )
            )
        sets[side] = ImageSet(prompt_side=side, count=n, images=tuple(records))
    return sets[Side.ORIGINAL], sets[Side.CONTRAST]
