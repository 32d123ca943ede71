"""Metric-scorer protocol, score cache, and deterministic built-in scorers.

Remote scorer wire contract (any conforming server plugs in, including the
bundled reference server and the standalone adapter package):

    POST <endpoint>/score
    body: {"texts": [str, ...], "image_b64": [str, ...]}
          optional: {"question_template": str}   (VQA-style scorers)
    response: {"scores": [float, ...]}  with len(scores) == len(texts),
          score i belonging to (texts[i], image_b64[i]).
    Errors: non-2xx status with body {"error": str}.

Scores are cached keyed by (scorer_id, text hash, image hash); text hashes
are over NFC-normalized text, image hashes over raw bytes. The cache is
append-only and re-scoring a key with a different value is an error, which
pins scorer determinism.
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

from .clients import ClientError, with_retries
from .dataset import SamplePair
from .pipeline import ImageRecord
from .utils import atomic_write_text, canonical_json, text_digest, unit_uniform

ScoreFn = Callable[[str, ImageRecord], float]

DEFAULT_VQA_QUESTION = (
    "Does this image show the following content:'{prompt}'? Answer with Yes or No."
)


class ScorerKind(str, Enum):
    REMOTE = "remote"
    BUILTIN = "builtin"


class ScoringError(RuntimeError):
    pass


class DeterminismError(ScoringError):
    """A cached key was re-scored with a different value."""


class GroundTruthError(ScoringError):
    """The oracle was asked about a pair the manifest knows nothing about."""


@dataclass(frozen=True)
class ScorerDescriptor:
    scorer_id: str
    kind: ScorerKind
    endpoint: str | None = None
    prompt_template: str | None = None
    builtin_spec: str | None = None  # e.g. "random:7", "constant:0.5", "oracle"

    def __post_init__(self) -> None:
        if self.kind is ScorerKind.REMOTE and not self.endpoint:
            raise ValueError(f"remote scorer {self.scorer_id!r} requires an endpoint")
        if self.kind is ScorerKind.BUILTIN and not self.builtin_spec:
            raise ValueError(f"builtin scorer {self.scorer_id!r} requires builtin_spec")


@dataclass(frozen=True)
class ContrastiveVqaSpec:
    """Yes/No question contract for VQA-style contrastive scoring."""

    question_template: str = DEFAULT_VQA_QUESTION
    positive_token: str = "Yes"
    negative_token: str = "No"

    def __post_init__(self) -> None:
        if self.question_template.count("{prompt}") != 1:
            raise ValueError("question_template must contain exactly one {prompt}")

    def render(self, prompt: str) -> str:
        return self.question_template.replace("{prompt}", prompt)


def contrastive_vqa_score(p_yes: float, p_no: float) -> float:
    """Difference of the answer-token probabilities, in [-1, 1]."""
    for name, p in (("p_yes", p_yes), ("p_no", p_no)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    return p_yes - p_no


class ScoreTable:
    """Append-only cache of metric scores; thread-safe per-key inserts."""

    def __init__(self, provenance: dict[str, str] | None = None):
        self._entries: dict[tuple[str, str, str], float] = {}
        self._failed: set[tuple[str, str, str]] = set()
        self.provenance: dict[str, str] = dict(provenance or {})
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, scorer_id: str, text_hash: str, image_hash: str, score: float) -> None:
        key = (scorer_id, text_hash, image_hash)
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None and existing != score:
                raise DeterminismError(
                    f"key {key} re-scored with {score!r}, cached {existing!r}"
                )
            self._entries[key] = float(score)
            self._failed.discard(key)

    def get(self, scorer_id: str, text_hash: str, image_hash: str) -> float | None:
        return self._entries.get((scorer_id, text_hash, image_hash))

    def mark_failed(self, scorer_id: str, text_hash: str, image_hash: str) -> None:
        key = (scorer_id, text_hash, image_hash)
        with self._lock:
            if key not in self._entries:
                self._failed.add(key)

    def is_failed(self, scorer_id: str, text_hash: str, image_hash: str) -> bool:
        return (scorer_id, text_hash, image_hash) in self._failed

    def failed_count(self) -> int:
        return len(self._failed)

    def entries(self) -> list[tuple[tuple[str, str, str], float]]:
        return sorted(self._entries.items())

    def save(self, path: Path | str) -> None:
        data = {
            "provenance": self.provenance,
            "entries": {"|".join(k): v for k, v in self._entries.items()},
            "failed": sorted("|".join(k) for k in self._failed),
        }
        atomic_write_text(Path(path), canonical_json(data))

    @classmethod
    def load(cls, path: Path | str) -> "ScoreTable":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        table = cls(provenance=raw.get("provenance"))
        for key, value in raw.get("entries", {}).items():
            scorer_id, text_hash, image_hash = key.split("|")
            table._entries[(scorer_id, text_hash, image_hash)] = float(value)
        for key in raw.get("failed", ()):
            scorer_id, text_hash, image_hash = key.split("|")
            table._failed.add((scorer_id, text_hash, image_hash))
        return table


# ---------------------------------------------------------------------------
# Built-in scorers


def random_scorer(seed: int) -> ScoreFn:
    """Seeded uniform score on [0, 1), a pure function of (seed, text, image)."""

    def score(text: str, image: ImageRecord) -> float:
        return unit_uniform(seed, text_digest(text), image.sha256)

    return score


def constant_scorer(value: float) -> ScoreFn:
    def score(text: str, image: ImageRecord) -> float:
        return value

    return score


def _match_maps(samples: Iterable[SamplePair]):
    matching: set[tuple[str, str]] = set()
    known: set[tuple[str, str]] = set()
    for sample in samples:
        t_o = text_digest(sample.pair.original_text)
        t_c = text_digest(sample.pair.contrast_text)
        originals = [r.sha256 for r in sample.images_original.images]
        contrasts = [r.sha256 for r in sample.images_contrast.images]
        for h in originals:
            matching.add((t_o, h))
        for h in contrasts:
            matching.add((t_c, h))
        for t in (t_o, t_c):
            for h in originals + contrasts:
                known.add((t, h))
    return matching, known


def oracle_scorer(samples: Iterable[SamplePair]) -> ScoreFn:
    """1.0 on matching pairs, 0.0 on contrast pairs, from manifest ground truth."""
    matching, known = _match_maps(samples)

    def score(text: str, image: ImageRecord) -> float:
        key = (text_digest(text), image.sha256)
        if key not in known:
            raise GroundTruthError(f"no ground truth for pair {key}")
        return 1.0 if key in matching else 0.0

    return score


def anti_oracle_scorer(samples: Iterable[SamplePair]) -> ScoreFn:
    inner = oracle_scorer(samples)

    def score(text: str, image: ImageRecord) -> float:
        return 1.0 - inner(text, image)

    return score


def builtin_scorer(
    descriptor: ScorerDescriptor, samples: Iterable[SamplePair] | None = None
) -> ScoreFn:
    """Resolve a builtin descriptor: oracle, anti_oracle, random:<seed>, constant:<c>."""
    spec = descriptor.builtin_spec or ""
    name, _, arg = spec.partition(":")
    if name == "random":
        return random_scorer(int(arg or 0))
    if name == "constant":
        return constant_scorer(float(arg or 0.0))
    if name in ("oracle", "anti_oracle"):
        if samples is None:
            raise ScoringError(f"{name} scorer requires manifest samples")
        return oracle_scorer(samples) if name == "oracle" else anti_oracle_scorer(samples)
    raise ScoringError(f"unknown builtin scorer spec {spec!r}")


# ---------------------------------------------------------------------------
# Scoring runs


class RemoteScorer:
    def __init__(self, descriptor: ScorerDescriptor, timeout: float = 300.0, session=None):
        self.descriptor = descriptor
        self.timeout = timeout
        self._session = session or requests.Session()

    def score_batch(self, texts: Sequence[str], images_b64: Sequence[str]) -> list[float]:
        body: dict = {"texts": list(texts), "image_b64": list(images_b64)}
        if self.descriptor.prompt_template:
            body["question_template"] = self.descriptor.prompt_template
        endpoint = (self.descriptor.endpoint or "").rstrip("/") + "/score"
        try:
            resp = self._session.post(endpoint, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ClientError(f"scorer request failed: {exc}") from exc
        if resp.status_code != 200:
            detail = ""
            try:
                detail = resp.json().get("error", "")
            except ValueError:
                pass
            raise ClientError(f"scorer returned HTTP {resp.status_code}: {detail}")
        try:
            scores = resp.json()["scores"]
        except (ValueError, KeyError) as exc:
            raise ClientError(f"malformed scorer response: {exc}") from exc
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise ClientError("scorer response 'scores' length mismatch")
        return [float(s) for s in scores]


def score_pairs(
    pairs: Sequence[tuple[str, ImageRecord]],
    scorer: ScorerDescriptor,
    table: ScoreTable,
    *,
    samples: Iterable[SamplePair] | None = None,
    bytes_loader: Callable[[str], bytes] | None = None,
    batch_size: int = 16,
    retry_attempts: int = 3,
    retry_backoff: float = 0.5,
    sleep=None,
    session=None,
) -> ScoreTable:
    """Ensure every requested (text, image) key is present in the table.

    Cache hits are skipped. Remote failures after retries mark the keys as
    failed; evaluation treats those samples as unusable rather than imputing
    a score.
    """
    missing: list[tuple[str, ImageRecord, str]] = []
    seen: set[tuple[str, str]] = set()
    for text, image in pairs:
        th = text_digest(text)
        if (th, image.sha256) in seen:
            continue
        seen.add((th, image.sha256))
        if table.get(scorer.scorer_id, th, image.sha256) is None:
            missing.append((text, image, th))
    if not missing:
        return table

    if scorer.kind is ScorerKind.BUILTIN:
        fn = builtin_scorer(scorer, samples=samples)
        for text, image, th in missing:
            table.add(scorer.scorer_id, th, image.sha256, fn(text, image))
        return table

    if bytes_loader is None:
        raise ScoringError("remote scoring requires a bytes_loader for image data")
    remote = RemoteScorer(scorer, session=session)
    retry_kwargs = {"attempts": retry_attempts, "backoff": retry_backoff}
    if sleep is not None:
        retry_kwargs["sleep"] = sleep

    for start in range(0, len(missing), batch_size):
        batch = missing[start : start + batch_size]
        texts = [t for t, _, _ in batch]
        payload = [
            base64.b64encode(bytes_loader(image.path)).decode("ascii")
            for _, image, _ in batch
        ]
        try:
            scores = with_retries(
                lambda: remote.score_batch(texts, payload), **retry_kwargs
            )
        except ClientError:
            for _, image, th in batch:
                table.mark_failed(scorer.scorer_id, th, image.sha256)
            continue
        for (_, image, th), value in zip(batch, scores):
            table.add(scorer.scorer_id, th, image.sha256, value)
    return table


def sample_score_requests(sample: SamplePair) -> list[tuple[str, ImageRecord]]:
    """All text-image combinations of a sample (both texts against both sides)."""
    requests_: list[tuple[str, ImageRecord]] = []
    for text in (sample.pair.original_text, sample.pair.contrast_text):
        for image_set in (sample.images_original, sample.images_contrast):
            for record in image_set.images:
                requests_.append((text, record))
    return requests_
