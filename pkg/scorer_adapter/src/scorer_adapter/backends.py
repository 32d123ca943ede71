"""Scoring backends.

Every backend answers score_batch(texts, images, question_template) with one
float per pair. Embedding backends report cosine similarity (template text,
when given, is applied to the prompt before encoding); VQA backends report
p(Yes) - p(No) from the answer-token probabilities of the rendered question.

The stub backends are deterministic hash constructions with no model
dependencies, used for CI and protocol conformance; the real backends load
their models lazily on first use and share the exact same serving path.
"""

from __future__ import annotations

import hashlib
import io
from typing import Protocol, Sequence

import numpy as np

DEFAULT_QUESTION_TEMPLATE = (
    "Does this image show the following content:'{prompt}'? Answer with Yes or No."
)


def render_question(template: str, prompt: str) -> str:
    if "{prompt}" not in template:
        raise ValueError("question_template must contain {prompt}")
    return template.replace("{prompt}", prompt)


class Backend(Protocol):
    def score_batch(
        self,
        texts: Sequence[str],
        images: Sequence[bytes],
        question_template: str | None,
    ) -> list[float]: ...


def _seeded_unit_vector(key: bytes, dim: int = 64) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "big") % (2**32)
    rng = np.random.RandomState(seed)
    vector = rng.standard_normal(dim)
    return vector / np.linalg.norm(vector)


class StubEmbeddingBackend:
    """Cosine similarity of hash-seeded pseudo-embeddings."""

    def __init__(self, dim: int = 64):
        self.dim = dim

    def score_batch(self, texts, images, question_template):
        scores = []
        for text, image in zip(texts, images):
            if question_template is not None:
                text = render_question(question_template, text)
            t = _seeded_unit_vector(b"text:" + text.encode("utf-8"), self.dim)
            v = _seeded_unit_vector(b"image:" + image, self.dim)
            scores.append(float(np.dot(t, v)))
        return scores


class StubVqaBackend:
    """Hash-derived yes/no probabilities combined as p(Yes) - p(No)."""

    def score_batch(self, texts, images, question_template):
        template = question_template or DEFAULT_QUESTION_TEMPLATE
        scores = []
        for text, image in zip(texts, images):
            question = render_question(template, text)
            digest = hashlib.sha256(
                question.encode("utf-8") + b"\x1f" + image
            ).digest()
            p_yes = int.from_bytes(digest[:8], "big") / 2**64
            p_no = 1.0 - p_yes
            scores.append(p_yes - p_no)
        return scores


class ClipEmbeddingBackend:
    """Image-text cosine similarity via a sentence-transformers CLIP model.

    Requires the `embedding` extra and downloadable weights; deterministic
    because inference runs in eval mode with gradients disabled.
    """

    def __init__(self, model_id: str, device: str = "cpu"):
        from PIL import Image  # noqa: F401  (import check up front)
        from sentence_transformers import SentenceTransformer

        self._pil = __import__("PIL.Image", fromlist=["Image"])
        self.model = SentenceTransformer(model_id, device=device)
        self.model.eval()

    def score_batch(self, texts, images, question_template):
        rendered = [
            render_question(question_template, t) if question_template else t
            for t in texts
        ]
        pil_images = [self._pil.open(io.BytesIO(b)).convert("RGB") for b in images]
        text_emb = self.model.encode(
            rendered, convert_to_numpy=True, normalize_embeddings=True
        )
        image_emb = self.model.encode(
            pil_images, convert_to_numpy=True, normalize_embeddings=True
        )
        return [float(np.dot(t, v)) for t, v in zip(text_emb, image_emb)]


class HfVqaBackend:
    """Contrastive yes/no scoring via a transformers VQA model.

    Scores are p(Yes) - p(No) over the first answer token's distribution for
    the rendered question. Requires the `vqa` extra and downloadable weights.
    """

    def __init__(self, model_id: str, device: str = "cpu"):
        import torch
        from PIL import Image  # noqa: F401
        from transformers import AutoModelForVisualQuestionAnswering, AutoProcessor

        self._torch = torch
        self._pil = __import__("PIL.Image", fromlist=["Image"])
        self.processor = AutoProcessor.from_pretrained(model_id)
        self.model = AutoModelForVisualQuestionAnswering.from_pretrained(model_id)
        self.model.to(device)
        self.model.eval()
        self.device = device
        tokenizer = self.processor.tokenizer
        self.yes_id = tokenizer.convert_tokens_to_ids(tokenizer.tokenize("Yes")[0])
        self.no_id = tokenizer.convert_tokens_to_ids(tokenizer.tokenize("No")[0])

    def score_batch(self, texts, images, question_template):
        template = question_template or DEFAULT_QUESTION_TEMPLATE
        questions = [render_question(template, t) for t in texts]
        pil_images = [self._pil.open(io.BytesIO(b)).convert("RGB") for b in images]
        scores = []
        with self._torch.no_grad():
            for question, image in zip(questions, pil_images):
                inputs = self.processor(image, question, return_tensors="pt").to(
                    self.device
                )
                logits = self.model(**inputs).logits[0]
                probs = logits.softmax(-1)
                scores.append(float(probs[self.yes_id] - probs[self.no_id]))
        return scores


def make_backend(model: str, device: str = "cpu") -> Backend:
    if model == "stub-embedding":
        return StubEmbeddingBackend()
    if model == "stub-vqa":
        return StubVqaBackend()
    if model.startswith("clip:"):
        return ClipEmbeddingBackend(model.removeprefix("clip:"), device=device)
    if model.startswith("vqa:"):
        return HfVqaBackend(model.removeprefix("vqa:"), device=device)
    raise ValueError(f"unsupported model {model!r}")
