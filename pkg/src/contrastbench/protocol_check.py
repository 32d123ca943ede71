"""Conformance checks for the scorer wire protocol.

``check_scorer_protocol(endpoint)`` drives a live scorer service through the
protocol surface and raises AssertionError on the first violation. The same
checks run against the bundled reference server and against any external
adapter, so passing here means the service is a drop-in scorer backend.
"""

from __future__ import annotations

import base64

import requests

from .utils import png_bytes

DEFAULT_TEMPLATE = "Does this image show the following content:'{prompt}'? Answer with Yes or No."


def _b64_images(count: int) -> list[str]:
    images = [png_bytes(4, 4, (i * 40 % 256, 10, 200 - i * 20 % 200)) for i in range(count)]
    return [base64.b64encode(i).decode("ascii") for i in images]


def check_scorer_protocol(
    endpoint: str,
    session: requests.Session | None = None,
    timeout: float = 60.0,
) -> None:
    """Assert that the service at endpoint implements the /score contract."""
    session = session or requests.Session()
    url = endpoint.rstrip("/") + "/score"
    texts = ["a red circle", "a blue square", "two green triangles"]
    images = _b64_images(len(texts))

    def post(body):
        return session.post(url, json=body, timeout=timeout)

    # 1. Basic scoring: one float per (text, image) pair, order preserved.
    resp = post({"texts": texts, "image_b64": images})
    assert resp.status_code == 200, f"scoring request failed: HTTP {resp.status_code}"
    payload = resp.json()
    assert "scores" in payload, "response must carry a 'scores' field"
    scores = payload["scores"]
    assert isinstance(scores, list) and len(scores) == len(texts), (
        "'scores' must be a list with one entry per input pair"
    )
    assert all(isinstance(s, (int, float)) for s in scores), "scores must be numbers"

    # 2. Determinism: the identical request yields identical scores.
    repeat = post({"texts": texts, "image_b64": images}).json()["scores"]
    assert repeat == scores, "identical requests must yield identical scores"

    # 3. VQA-style template support: scores bounded by the probability difference.
    resp = post({"texts": texts, "image_b64": images, "question_template": DEFAULT_TEMPLATE})
    assert resp.status_code == 200, "template-carrying request must succeed"
    vqa_scores = resp.json()["scores"]
    assert len(vqa_scores) == len(texts)
    assert all(-1.0 <= s <= 1.0 for s in vqa_scores), (
        "template mode must report probability differences in [-1, 1]"
    )
    repeat = post(
        {"texts": texts, "image_b64": images, "question_template": DEFAULT_TEMPLATE}
    ).json()["scores"]
    assert repeat == vqa_scores, "template mode must be deterministic too"

    # 4. Length mismatch: structured error, non-2xx status.
    resp = post({"texts": texts, "image_b64": images[:1]})
    assert resp.status_code >= 400, "length mismatch must be rejected"
    assert "error" in resp.json(), "errors must be structured JSON with an 'error' field"

    # 5. Malformed body: structured error and the service stays up.
    resp = session.post(
        url, data=b"this is not json", headers={"Content-Type": "application/json"},
        timeout=timeout,
    )
    assert resp.status_code >= 400, "malformed body must be rejected"
    assert "error" in resp.json(), "malformed-body errors must be structured JSON"
    resp = post({"texts": texts, "image_b64": images})
    assert resp.status_code == 200, "service must keep serving after a bad request"
    assert resp.json()["scores"] == scores, "scores must be unchanged after a bad request"
