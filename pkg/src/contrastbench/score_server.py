"""Reference HTTP server for the scorer wire protocol.

Serves deterministic hash-based scores so the remote scoring path can be
exercised without any model. Doubles as the executable documentation of the
protocol: request/response handling here is the normative behavior that
external scorer services must match.
"""

from __future__ import annotations

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

from .utils import bytes_digest, text_digest, unit_uniform

# score_fn(text, image_bytes, question_template_or_None) -> float
WireScoreFn = Callable[[str, bytes, str | None], float]


def hash_score_fn(seed: int = 0) -> WireScoreFn:
    """Deterministic pseudo-score keyed by text, image bytes, and template."""

    def fn(text: str, image: bytes, template: str | None) -> float:
        base = unit_uniform(seed, text_digest(text), bytes_digest(image), template or "")
        if template is not None:
            # VQA-style: derive pseudo token probabilities and report their
            # difference, staying inside [-1, 1].
            p_yes = base
            p_no = 1.0 - base
            return p_yes - p_no
        return base

    return fn


class _Handler(BaseHTTPRequestHandler):
    score_fn: WireScoreFn = staticmethod(hash_score_fn())
    request_log: list[int] | None = None
    fail_next: list[int] | None = None  # mutable box of failures to inject

    def log_message(self, *args):  # quiet
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        if self.path.rstrip("/") != "/score" and self.path != "/score":
            self._send(404, {"error": f"unknown path {self.path}"})
            return
        if self.fail_next and self.fail_next[0] > 0:
            self.fail_next[0] -= 1
            self._send(503, {"error": "injected transient failure"})
            return
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except ValueError:
            self._send(400, {"error": "request body is not valid JSON"})
            return
        texts = body.get("texts")
        images = body.get("image_b64")
        template = body.get("question_template")
        if not isinstance(texts, list) or not isinstance(images, list):
            self._send(400, {"error": "fields 'texts' and 'image_b64' must be lists"})
            return
        if len(texts) != len(images):
            self._send(400, {"error": "'texts' and 'image_b64' length mismatch"})
            return
        if template is not None and not isinstance(template, str):
            self._send(400, {"error": "'question_template' must be a string"})
            return
        try:
            decoded = [base64.b64decode(i, validate=True) for i in images]
        except Exception:
            self._send(400, {"error": "image_b64 entries must be base64"})
            return
        if self.request_log is not None:
            self.request_log.append(len(texts))
        scores = [
            float(type(self).score_fn(t, img, template))
            for t, img in zip(texts, decoded)
        ]
        self._send(200, {"scores": scores})


class ScoreServer:
    """Run the reference scorer on a private port; use as a context manager."""

    def __init__(self, score_fn: WireScoreFn | None = None, port: int = 0):
        handler = type("Handler", (_Handler,), {})
        handler.score_fn = staticmethod(score_fn or hash_score_fn())
        handler.request_log = []
        handler.fail_next = [0]
        self._handler = handler
        self._server = ThreadingHTTPServer(("127.0.0.1", port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def request_sizes(self) -> list[int]:
        return self._handler.request_log

    def inject_failures(self, count: int) -> None:
        self._handler.fail_next[0] = count

    def __enter__(self) -> "ScoreServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
