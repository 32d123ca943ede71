"""HTTP serving of the /score wire protocol.

    POST /score
    body: {"texts": [str], "image_b64": [str], "question_template"?: str}
    response: {"scores": [float]}  (one per pair, order preserved)
    errors: non-2xx with {"error": str}; the service keeps running.

A single model instance serves all requests; scoring runs under a lock with
the request split into backend batches of at most config.batch_size.
"""

from __future__ import annotations

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .backends import Backend, make_backend
from .config import AdapterConfig


class ScoringSession:
    """Thread-safe batching wrapper around one backend instance."""

    def __init__(self, backend: Backend, batch_size: int):
        self.backend = backend
        self.batch_size = batch_size
        self._lock = threading.Lock()

    def score(self, texts, images, question_template):
        scores: list[float] = []
        with self._lock:
            for start in range(0, len(texts), self.batch_size):
                chunk_texts = texts[start : start + self.batch_size]
                chunk_images = images[start : start + self.batch_size]
                chunk = self.backend.score_batch(
                    chunk_texts, chunk_images, question_template
                )
                if len(chunk) != len(chunk_texts):
                    raise RuntimeError("backend returned a mismatched batch")
                scores.extend(float(s) for s in chunk)
        return scores


def _make_handler(session: ScoringSession):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if self.path.rstrip("/") != "/score":
                self._send(404, {"error": f"unknown path {self.path!r}"})
                return
            length = int(self.headers.get("Content-Length", "0"))
            try:
                body = json.loads(self.rfile.read(length))
            except ValueError:
                self._send(400, {"error": "request body is not valid JSON"})
                return
            texts = body.get("texts")
            images_b64 = body.get("image_b64")
            template = body.get("question_template")
            if not isinstance(texts, list) or not isinstance(images_b64, list):
                self._send(
                    400, {"error": "fields 'texts' and 'image_b64' must be lists"}
                )
                return
            if len(texts) != len(images_b64):
                self._send(400, {"error": "'texts' and 'image_b64' length mismatch"})
                return
            if template is not None and not isinstance(template, str):
                self._send(400, {"error": "'question_template' must be a string"})
                return
            try:
                images = [base64.b64decode(i, validate=True) for i in images_b64]
            except Exception:
                self._send(400, {"error": "image_b64 entries must be base64"})
                return
            try:
                scores = session.score([str(t) for t in texts], images, template)
            except ValueError as exc:
                self._send(400, {"error": str(exc)})
                return
            except Exception as exc:  # scoring failure must not kill the service
                self._send(500, {"error": f"scoring failed: {exc}"})
                return
            self._send(200, {"scores": scores})

    return Handler


class AdapterServer:
    def __init__(self, config: AdapterConfig, backend: Backend | None = None):
        self.config = config
        backend = backend or make_backend(config.model, device=config.device)
        self.session = ScoringSession(backend, config.batch_size)
        self._server = ThreadingHTTPServer(
            ("127.0.0.1", config.port), _make_handler(self.session)
        )
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "AdapterServer":
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "AdapterServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
