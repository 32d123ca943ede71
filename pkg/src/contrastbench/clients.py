"""Clients for the external text- and image-generation services.

Wire contracts (any conforming server plugs in):

Text generation
    POST <endpoint>  body: {"model": str, "prompt": str, "max_tokens": int,
    "temperature": float, "count": int}
    response: {"completions": [str, ...]}  (HTTP 200)

Image generation
    POST <endpoint>  body: {"model": str, "prompt": str, "seed": int,
    "width": int, "height": int}
    response: raw PNG bytes (HTTP 200, content-type image/png) or a JSON
    object {"error": str} with a non-2xx status.

Stub clients implement the same interfaces deterministically and never touch
the network, so CI and demo runs are reproducible byte-for-byte.
"""

from __future__ import annotations

import json
import re
import time
from typing import Callable, Protocol

import requests

from .utils import png_bytes, unit_uniform


class ClientError(RuntimeError):
    """Transport or protocol failure talking to a generation service."""


DEFAULT_RETRY_ATTEMPTS = 3
DEFAULT_BACKOFF_SECONDS = 0.5


def with_retries(
    fn: Callable[[], object],
    attempts: int = DEFAULT_RETRY_ATTEMPTS,
    backoff: float = DEFAULT_BACKOFF_SECONDS,
    sleep: Callable[[float], None] = time.sleep,
):
    """Run fn with exponential backoff; re-raises the last ClientError."""
    last: ClientError | None = None
    for attempt in range(attempts):
        try:
            return fn()
        except ClientError as exc:
            last = exc
            if attempt + 1 < attempts:
                sleep(backoff * (2**attempt))
    assert last is not None
    raise last


class TextGenClient(Protocol):
    def complete(
        self, model: str, prompt: str, max_tokens: int, temperature: float, count: int
    ) -> list[str]: ...


class ImageGenClient(Protocol):
    def generate(
        self, model: str, prompt: str, seed: int, width: int, height: int
    ) -> bytes: ...


class HttpTextGenClient:
    def __init__(self, endpoint: str, timeout: float = 120.0, session=None):
        self.endpoint = endpoint
        self.timeout = timeout
        self._session = session or requests.Session()

    def complete(self, model, prompt, max_tokens, temperature, count):
        body = {
            "model": model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "temperature": temperature,
            "count": count,
        }
        try:
            resp = self._session.post(self.endpoint, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ClientError(f"text generation request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ClientError(f"text generation returned HTTP {resp.status_code}")
        try:
            completions = resp.json()["completions"]
        except (ValueError, KeyError) as exc:
            raise ClientError(f"malformed text generation response: {exc}") from exc
        if not isinstance(completions, list):
            raise ClientError("text generation response field 'completions' must be a list")
        return [str(c) for c in completions]


class HttpImageGenClient:
    def __init__(self, endpoint: str, timeout: float = 300.0, session=None):
        self.endpoint = endpoint
        self.timeout = timeout
        self._session = session or requests.Session()

    def generate(self, model, prompt, seed, width, height):
        body = {
            "model": model,
            "prompt": prompt,
            "seed": seed,
            "width": width,
            "height": height,
        }
        try:
            resp = self._session.post(self.endpoint, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ClientError(f"image generation request failed: {exc}") from exc
        if resp.status_code != 200:
            detail = ""
            try:
                detail = resp.json().get("error", "")
            except ValueError:
                pass
            raise ClientError(
                f"image generation returned HTTP {resp.status_code}: {detail}"
            )
        return resp.content


_QUOTED = re.compile(r'"([^"]+)"')

_ADJECTIVES = ("quiet", "bright", "misty", "busy", "calm", "vast", "old", "modern")
_SETTINGS = (
    "at sunrise",
    "under heavy clouds",
    "in soft evening light",
    "on a clear day",
    "after the rain",
    "in winter",
)


class StubTextGenClient:
    """Deterministic canned text generation for tests and demos.

    Inspects the rendered template to decide which JSON keys to emit and
    derives the wording from a hash of (model, prompt, completion index),
    so repeated runs produce identical output.
    """

    def __init__(self, wrap_reasoning: bool = True):
        self.wrap_reasoning = wrap_reasoning
        self.calls = 0

    def complete(self, model, prompt, max_tokens, temperature, count):
        self.calls += 1
        ignore = {"the same", "Your prompt here", "Your contrast prompt here"}
        quoted = [q for q in _QUOTED.findall(prompt) if q not in ignore]
        subject = quoted[0] if quoted else "a scene"
        wants_definition = '"varied_definition"' in prompt
        is_placement = "places the entity" in prompt
        concept = "" if (wants_definition or is_placement) else (
            quoted[1] if len(quoted) > 1 else ""
        )
        alt_subject = quoted[1] if (is_placement and len(quoted) > 1) else ""

        completions = []
        for i in range(count):
            pick = lambda options, salt: options[
                int(unit_uniform(model, prompt, i, salt) * len(options)) % len(options)
            ]
            adjective = pick(_ADJECTIVES, "adj")
            setting = pick(_SETTINGS, "set")
            base = f"A {adjective} scene about {subject} {setting}"
            if concept:
                original = f"{base}, emphasizing {concept}."
                contrast = f"{base}, emphasizing the opposite of {concept}."
            elif alt_subject:
                original = f"{base}."
                contrast = f"A {adjective} scene about {alt_subject} {setting}."
            else:
                original = f"{base}, shown in its usual form."
                contrast = f"{base}, shown with an unusual appearance."
            payload: dict[str, str] = {"prompt": original, "contrast_prompt": contrast}
            if wants_definition:
                payload = {
                    "prompt": original,
                    "varied_definition": f"An unusual variant of {subject} with swapped colors.",
                    "contrast_prompt": contrast,
                }
            text = json.dumps(payload)
            if self.wrap_reasoning and i % 2 == 0:
                text = (
                    "Let me think about the scene first. The subject should be clear"
                    " and the contrast minimal.\n" + text
                )
            completions.append(text)
        return completions


class StubImageGenClient:
    """Deterministic tiny PNG generation keyed by (model, prompt, seed)."""

    def __init__(self, width_cap: int = 16):
        self.width_cap = width_cap
        self.calls = 0
        self.prompts_seen: list[str] = []

    def generate(self, model, prompt, seed, width, height):
        self.calls += 1
        self.prompts_seen.append(prompt)
        rgb = (
            int(unit_uniform(model, prompt, seed, "r") * 256) % 256,
            int(unit_uniform(model, prompt, seed, "g") * 256) % 256,
            int(unit_uniform(model, prompt, seed, "b") * 256) % 256,
        )
        w = min(width, self.width_cap)
        h = min(height, self.width_cap)
        return png_bytes(w, h, rgb)


def make_text_client(endpoint: str) -> TextGenClient:
    if endpoint == "stub":
        return StubTextGenClient()
    return HttpTextGenClient(endpoint)


def make_image_client(endpoint: str) -> ImageGenClient:
    if endpoint == "stub":
        return StubImageGenClient()
    return HttpImageGenClient(endpoint)
