"""Human verification and rating workflow: task building plus HTTP service.

Filtering tasks show one prompt side's images for keep/remove decisions that
update the manifest's verification state; rating tasks show one text with one
image set and collect a continuous 1-5 slider value. Every ~12 completed
ratings an attention check with an instructed score range is woven into the
annotator's stream. All decisions are persisted immediately (atomic manifest
swap, append-only ratings log), so the service can be restarted at any time.

HTTP API
    GET  /tasks/next?annotator=<id>      -> next task for the annotator
    POST /tasks/<task_id>/filter         body {"image_id", "decision", "annotator"?}
                                            decision: "accept" | "reject"
    POST /tasks/<task_id>/rate           body {"value", "annotator"}
    GET  /progress                       -> filter and rating counters
    GET  /images/<relpath>               -> image bytes from the dataset tree
Errors are JSON objects {"error": str} with a 4xx status.
"""

from __future__ import annotations

import json
import math
import random
import threading
import urllib.parse
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .dataset import (
    ImageReview,
    Manifest,
    ReviewStatus,
    SamplePair,
    Suite,
    read_manifest,
    write_manifest,
)
from .stats import RatingRecord, record_to_json, save_ratings
from .utils import unit_uniform

SLIDER_MIN = 1.0
SLIDER_MAX = 5.0
SLIDER_STEP = 0.01

_TEXT_SIDES = ("original", "contrast")
_DIRECTION_COMBOS = (
    ("original", "original"),
    ("contrast", "contrast"),
    ("original", "contrast"),
    ("contrast", "original"),
)

_ATTENTION_DECOYS = (
    "A quiet village street at dusk, lamps just turning on.",
    "A wide meadow under a pale morning sky.",
    "A small harbor with fishing boats at rest.",
    "A snow-covered pine forest in clear light.",
)


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    kind: str  # "filter" | "rate"
    prompt_text: str
    sample_id: str | None
    category: str
    batch_id: str
    image_ids: tuple[str, ...]
    image_paths: tuple[str, ...]
    direction_label: str | None = None
    is_attention_check: bool = False
    check_range: tuple[float, float] | None = None

    def to_json(self) -> dict:
        payload = {
            "task_id": self.task_id,
            "kind": self.kind,
            "prompt_text": self.prompt_text,
            "sample_id": self.sample_id,
            "category": self.category,
            "batch_id": self.batch_id,
            "images": [
                # record paths already carry the images/ prefix
                {"image_id": i, "url": f"/{p}"}
                for i, p in zip(self.image_ids, self.image_paths)
            ],
            "is_attention_check": self.is_attention_check,
        }
        if self.kind == "rate":
            payload["slider"] = {
                "min": SLIDER_MIN,
                "max": SLIDER_MAX,
                "step": SLIDER_STEP,
            }
            payload["direction_label"] = self.direction_label
        return payload


def _sides(sample: SamplePair) -> dict[str, tuple]:
    return {
        "original": sample.images_original.images,
        "contrast": sample.images_contrast.images,
    }


def build_filter_tasks(manifest: Manifest) -> list[AnnotationTask]:
    """One keep/remove task per human-supervised sample side."""
    tasks = []
    for sample in sorted(manifest.samples, key=lambda s: s.sample_id):
        if sample.suite is not Suite.HUMAN_SUPERVISED:
            continue
        texts = {
            "original": sample.pair.original_text,
            "contrast": sample.pair.contrast_text,
        }
        for side, records in _sides(sample).items():
            if not records:
                continue
            tasks.append(
                AnnotationTask(
                    task_id=f"filter--{sample.sample_id}--{side}",
                    kind="filter",
                    prompt_text=texts[side],
                    sample_id=sample.sample_id,
                    category=sample.category,
                    batch_id="filter",
                    image_ids=tuple(r.image_id for r in records),
                    image_paths=tuple(r.path for r in records),
                )
            )
    return tasks


def build_rating_tasks(
    manifest: Manifest, seed: int = 0, samples_per_batch: int = 20
) -> list[AnnotationTask]:
    """Four text/image-set pairings per sample, batched stratified round-robin.

    Within a batch the four pairings of each sample appear in seeded random
    order, and samples are interleaved across categories so every batch sees
    a category mix.
    """
    samples = sorted(manifest.samples, key=lambda s: (s.category, s.sample_id))
    if not samples:
        return []
    n_batches = max(1, math.ceil(len(samples) / samples_per_batch))
    batches: dict[int, list[SamplePair]] = {i: [] for i in range(n_batches)}
    for i, sample in enumerate(samples):
        batches[i % n_batches].append(sample)

    tasks = []
    for batch_index in range(n_batches):
        batch_id = f"batch-{batch_index:03d}"
        members = list(batches[batch_index])
        rng = random.Random(f"{seed}|{batch_id}")
        rng.shuffle(members)
        for sample in members:
            sides = _sides(sample)
            texts = {
                "original": sample.pair.original_text,
                "contrast": sample.pair.contrast_text,
            }
            combos = list(_DIRECTION_COMBOS)
            sample_rng = random.Random(f"{seed}|{batch_id}|{sample.sample_id}")
            sample_rng.shuffle(combos)
            for text_side, image_side in combos:
                records = sides[image_side]
                if not records:
                    continue
                tasks.append(
                    AnnotationTask(
                        task_id=f"rate--{sample.sample_id}--t_{text_side}--i_{image_side}",
                        kind="rate",
                        prompt_text=texts[text_side],
                        sample_id=sample.sample_id,
                        category=sample.category,
                        batch_id=batch_id,
                        image_ids=tuple(r.image_id for r in records),
                        image_paths=tuple(r.path for r in records),
                        direction_label=f"{text_side}_text--{image_side}_images",
                    )
                )
    return tasks


def _attention_task(
    seed: int, annotator: str, index: int, template_task: AnnotationTask
) -> AnnotationTask:
    lo_options = (1.5, 2.0, 2.5, 3.0, 3.5)
    lo = lo_options[
        int(unit_uniform(seed, annotator, index, "attn") * len(lo_options))
        % len(lo_options)
    ]
    hi = lo + 1.0
    decoy = _ATTENTION_DECOYS[index % len(_ATTENTION_DECOYS)]
    head, _, tail = decoy.partition(",")
    prompt = (
        f"{head}, and while reading this please select a score between "
        f"{lo:.2f} and {hi:.2f},{tail}"
    )
    return AnnotationTask(
        task_id=f"attn--{annotator}--{index}",
        kind="rate",
        prompt_text=prompt,
        sample_id=None,
        category="attention_check",
        batch_id=template_task.batch_id,
        image_ids=template_task.image_ids,
        image_paths=template_task.image_paths,
        direction_label=None,
        is_attention_check=True,
        check_range=(lo, hi),
    )


class AnnotationService:
    """State and operations behind the annotation HTTP API.

    Filter decisions go straight into the manifest (atomic file swap);
    ratings append to <state_dir>/ratings.jsonl. Both survive restarts.
    """

    def __init__(
        self,
        manifest_path: Path | str,
        state_dir: Path | str,
        seed: int = 0,
        samples_per_batch: int = 20,
        attention_every: int = 12,
    ):
        self.manifest_path = Path(manifest_path)
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self.attention_every = attention_every
        self._lock = threading.RLock()

        self.manifest = read_manifest(self.manifest_path)
        self.filter_tasks = build_filter_tasks(self.manifest)
        self.rating_tasks = build_rating_tasks(
            self.manifest, seed=seed, samples_per_batch=samples_per_batch
        )
        self._tasks = {t.task_id: t for t in self.filter_tasks + self.rating_tasks}

        self.ratings_path = self.state_dir / "ratings.jsonl"
        self.audit_path = self.state_dir / "audit.jsonl"
        # Last-wins rating per (annotator, task); the jsonl file keeps history.
        self._ratings: dict[tuple[str, str], RatingRecord] = {}
        self._served_attention: dict[tuple[str, int], AnnotationTask] = {}
        if self.ratings_path.exists():
            for line in self.ratings_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                raw = json.loads(line)
                record = RatingRecord(
                    annotator_id=raw["annotator_id"],
                    item_id=raw["item_id"],
                    value=float(raw["value"]),
                    batch_id=raw.get("batch_id", ""),
                    is_attention_check=bool(raw.get("is_attention_check", False)),
                    check_range=tuple(raw["check_range"]) if raw.get("check_range") else None,
                )
                self._ratings[(record.annotator_id, record.item_id)] = record

    # -- task flow ---------------------------------------------------------

    def _filter_complete(self, task: AnnotationTask) -> bool:
        sample = self.manifest.sample_by_id(task.sample_id)
        return all(
            sample.verification.status_of(i) is not ReviewStatus.UNREVIEWED
            for i in task.image_ids
        )

    def _completed_real_ratings(self, annotator: str) -> int:
        return sum(
            1
            for (a, task_id) in self._ratings
            if a == annotator and not task_id.startswith("attn--")
        )

    def next_task(self, annotator: str) -> AnnotationTask | None:
        with self._lock:
            for task in self.filter_tasks:
                if not self._filter_complete(task):
                    return task

            pending = [
                t
                for t in self.rating_tasks
                if (annotator, t.task_id) not in self._ratings
            ]
            if not pending:
                return None
            done = self._completed_real_ratings(annotator)
            if done and done % self.attention_every == 0:
                index = done // self.attention_every
                if (annotator, f"attn--{annotator}--{index}") not in self._ratings:
                    key = (annotator, index)
                    if key not in self._served_attention:
                        self._served_attention[key] = _attention_task(
                            self.seed, annotator, index, pending[0]
                        )
                    return self._served_attention[key]
            return pending[0]

    def _audit(self, event: dict) -> None:
        event = dict(event, at=datetime.now(timezone.utc).isoformat())
        with self.audit_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    def submit_filter(
        self, task_id: str, image_id: str, decision: str, annotator: str = "anonymous"
    ) -> dict:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None or task.kind != "filter":
                raise KeyError(f"unknown filter task {task_id!r}")
            if image_id not in task.image_ids:
                raise AnnotationError(f"image {image_id!r} is not part of task {task_id!r}")
            try:
                status = {"accept": ReviewStatus.ACCEPTED, "reject": ReviewStatus.REJECTED}[
                    decision
                ]
            except KeyError:
                raise AnnotationError(
                    f"decision must be 'accept' or 'reject', got {decision!r}"
                ) from None

            sample = self.manifest.sample_by_id(task.sample_id)
            review = ImageReview(
                status=status,
                reviewer=annotator,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
            updated = replace(
                sample, verification=sample.verification.with_review(image_id, review)
            )
            samples = tuple(
                updated if s.sample_id == sample.sample_id else s
                for s in self.manifest.samples
            )
            self.manifest = replace(self.manifest, samples=samples)
            write_manifest(self.manifest, self.manifest_path)
            self._audit(
                {
                    "event": "filter",
                    "task_id": task_id,
                    "image_id": image_id,
                    "decision": decision,
                    "annotator": annotator,
                }
            )
            return {"ok": True, "image_id": image_id, "status": status.value}

    def submit_rating(self, task_id: str, value: float, annotator: str) -> dict:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None and task_id.startswith("attn--"):
                task = next(
                    (
                        t
                        for t in self._served_attention.values()
                        if t.task_id == task_id
                    ),
                    None,
                )
            if task is None or task.kind != "rate":
                raise KeyError(f"unknown rating task {task_id!r}")
            value = float(value)
            if not SLIDER_MIN <= value <= SLIDER_MAX:
                raise AnnotationError(
                    f"value must be within [{SLIDER_MIN}, {SLIDER_MAX}], got {value}"
                )
            record = RatingRecord(
                annotator_id=annotator,
                item_id=task_id,
                value=round(value, 2),
                batch_id=task.batch_id,
                is_attention_check=task.is_attention_check,
                check_range=task.check_range,
            )
            self._ratings[(annotator, task_id)] = record
            with self.ratings_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record_to_json(record), sort_keys=True) + "\n")
                fh.flush()
            self._audit(
                {
                    "event": "rate",
                    "task_id": task_id,
                    "annotator": annotator,
                    "value": record.value,
                }
            )
            return {"ok": True, "task_id": task_id, "value": record.value}

    # -- reporting ---------------------------------------------------------

    def progress(self) -> dict:
        with self._lock:
            filter_counts: dict[str, dict[str, int]] = {}
            for sample in self.manifest.samples:
                if sample.suite is not Suite.HUMAN_SUPERVISED:
                    continue
                bucket = filter_counts.setdefault(
                    sample.category, {"unreviewed": 0, "accepted": 0, "rejected": 0}
                )
                for image_set in (sample.images_original, sample.images_contrast):
                    for record in image_set.images:
                        bucket[sample.verification.status_of(record.image_id).value] += 1

            completed: dict[str, int] = {}
            for annotator, task_id in self._ratings:
                completed[annotator] = completed.get(annotator, 0) + 1
            return {
                "filter": filter_counts,
                "ratings": {
                    "total_tasks": len(self.rating_tasks),
                    "completed": dict(sorted(completed.items())),
                },
            }

    def records(self) -> list[RatingRecord]:
        with self._lock:
            return sorted(
                self._ratings.values(),
                key=lambda r: (r.batch_id, r.item_id, r.annotator_id),
            )

    def export_ratings(self, path: Path | str) -> int:
        records = self.records()
        save_ratings(records, path)
        return len(records)


# ---------------------------------------------------------------------------
# HTTP layer


def _make_handler(service: AnnotationService, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _send_file(self, path: Path, content_type: str) -> None:
            data = path.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()

        def do_GET(self):
            parsed = urllib.parse.urlparse(self.path)
            if parsed.path == "/tasks/next":
                params = urllib.parse.parse_qs(parsed.query)
                annotator = params.get("annotator", ["anonymous"])[0]
                task = service.next_task(annotator)
                if task is None:
                    self._send_json(200, {"done": True})
                else:
                    self._send_json(200, task.to_json())
                return
            if parsed.path == "/progress":
                self._send_json(200, service.progress())
                return
            if parsed.path.startswith("/images/"):
                relpath = parsed.path.lstrip("/")  # record paths carry the images/ prefix
                target = (service.manifest_path.parent / relpath).resolve()
                root = (service.manifest_path.parent / "images").resolve()
                if not str(target).startswith(str(root)) or not target.is_file():
                    self._send_json(404, {"error": f"no such image {relpath!r}"})
                    return
                suffix = target.suffix.lower()
                ctype = "image/jpeg" if suffix in (".jpg", ".jpeg") else "image/png"
                self._send_file(target, ctype)
                return
            if ui_dir is not None:
                rel = parsed.path.lstrip("/") or "index.html"
                target = (ui_dir / rel).resolve()
                if str(target).startswith(str(ui_dir.resolve())) and target.is_file():
                    ctype = {
                        ".html": "text/html",
                        ".js": "text/javascript",
                        ".css": "text/css",
                    }.get(target.suffix, "application/octet-stream")
                    self._send_file(target, ctype)
                    return
            self._send_json(404, {"error": f"unknown path {parsed.path!r}"})

        def do_POST(self):
            parsed = urllib.parse.urlparse(self.path)
            parts = parsed.path.strip("/").split("/")
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw) if raw else {}
            except ValueError:
                self._send_json(400, {"error": "request body is not valid JSON"})
                return
            if len(parts) == 3 and parts[0] == "tasks" and parts[2] in ("filter", "rate"):
                task_id = urllib.parse.unquote(parts[1])
                try:
                    if parts[2] == "filter":
                        result = service.submit_filter(
                            task_id,
                            image_id=body.get("image_id", ""),
                            decision=body.get("decision", ""),
                            annotator=body.get("annotator", "anonymous"),
                        )
                    else:
                        result = service.submit_rating(
                            task_id,
                            value=body.get("value"),
                            annotator=body.get("annotator", "anonymous"),
                        )
                except KeyError as exc:
                    self._send_json(404, {"error": str(exc)})
                    return
                except (AnnotationError, TypeError, ValueError) as exc:
                    self._send_json(400, {"error": str(exc)})
                    return
                self._send_json(200, result)
                return
            self._send_json(404, {"error": f"unknown path {parsed.path!r}"})

    return Handler


class AnnotationServer:
    """HTTP wrapper around AnnotationService; usable as a context manager."""

    def __init__(
        self,
        service: AnnotationService,
        port: int = 0,
        ui_dir: Path | str | None = None,
    ):
        self.service = service
        handler = _make_handler(service, Path(ui_dir) if ui_dir else None)
        self._server = ThreadingHTTPServer(("127.0.0.1", port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> "AnnotationServer":
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "AnnotationServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
