"""Command-line interface.

Stages operate on a run directory described by a YAML config. Every command
prints a one-line JSON summary on success; failures print a JSON error object
to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import runner
from .annotation import AnnotationServer, AnnotationService
from .config import ConfigError, load_config


def _print_summary(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _fail(message: str, code: int = 1) -> int:
    print(json.dumps({"error": message}), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contrastbench",
        description="Build contrastive text-image test suites and meta-evaluate metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("gen-prompts", "generate contrastive prompt pairs (or ingest authored ones)"),
        ("gen-images", "generate images for every prompt side"),
        ("score", "fill the score cache for all configured scorers"),
        ("evaluate", "run the four contrastive evaluation directions"),
        ("report", "emit direction tables and category-by-scorer grids"),
        ("run-all", "gen-prompts, gen-images, score, evaluate, report in sequence"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="run config YAML")

    p = sub.add_parser("import-images", help="ingest external images into a sample side")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--sample", required=True, help="target sample id")
    p.add_argument("--side", required=True, choices=["original", "contrast"])
    p.add_argument("files", nargs="+", type=Path)

    p = sub.add_parser("serve-annotation", help="serve the annotation HTTP API")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--state-dir", required=True, type=Path)
    p.add_argument("--port", type=int, default=8760)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples-per-batch", type=int, default=20)
    p.add_argument("--attention-every", type=int, default=12)
    p.add_argument("--ui-dir", type=Path, default=None, help="serve a built UI from this dir")

    p = sub.add_parser("export-ratings", help="export collected ratings as JSONL")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--state-dir", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("make-fixture", help="write the bundled walkthrough fixture")
    p.add_argument("--out", required=True, type=Path)
    return parser


_STAGES = {
    "gen-prompts": runner.stage_gen_prompts,
    "gen-images": runner.stage_gen_images,
    "score": runner.stage_score,
    "evaluate": runner.stage_evaluate,
    "report": runner.stage_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in _STAGES:
            config = load_config(args.config)
            _print_summary(_STAGES[args.command](config))
            return 0
        if args.command == "run-all":
            config = load_config(args.config)
            for name in ("gen-prompts", "gen-images", "score", "evaluate", "report"):
                _print_summary(_STAGES[name](config))
            return 0
        if args.command == "import-images":
            config = load_config(args.config)
            summary = runner.stage_import_images(
                config, args.sample, args.side, args.files
            )
            _print_summary(summary)
            return 0
        if args.command == "serve-annotation":
            service = AnnotationService(
                args.manifest,
                args.state_dir,
                seed=args.seed,
                samples_per_batch=args.samples_per_batch,
                attention_every=args.attention_every,
            )
            server = AnnotationServer(service, port=args.port, ui_dir=args.ui_dir)
            _print_summary(
                {
                    "stage": "serve-annotation",
                    "endpoint": f"http://127.0.0.1:{args.port}",
                    "filter_tasks": len(service.filter_tasks),
                    "rating_tasks": len(service.rating_tasks),
                }
            )
            sys.stdout.flush()
            try:
                server.serve_forever()
            except KeyboardInterrupt:
                pass
            return 0
        if args.command == "export-ratings":
            service = AnnotationService(args.manifest, args.state_dir, seed=args.seed)
            count = service.export_ratings(args.out)
            _print_summary(
                {"stage": "export-ratings", "records": count, "path": str(args.out)}
            )
            return 0
        if args.command == "make-fixture":
            from .fixtures import build_micro_fixture

            build_micro_fixture(args.out)
            _print_summary({"stage": "make-fixture", "path": str(args.out)})
            return 0
        return _fail(f"unknown command {args.command!r}", 2)
    except ConfigError as exc:
        return _fail(f"config error: {exc}", 2)
    except runner.StageError as exc:
        return _fail(str(exc), 1)
    except Exception as exc:  # surface anything else as a machine-readable error
        return _fail(f"{type(exc).__name__}: {exc}", 1)


if __name__ == "__main__":
    sys.exit(main())
