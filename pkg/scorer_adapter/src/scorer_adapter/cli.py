"""Command line entry: serve a scorer backend on a port."""

from __future__ import annotations

import argparse
import json
import sys

from .config import AdapterConfig
from .server import AdapterServer


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="scorer-adapter",
        description="Serve an embedding-similarity or contrastive-VQA scorer "
        "over the /score wire protocol.",
    )
    parser.add_argument(
        "--model",
        default="stub-embedding",
        help="stub-embedding | stub-vqa | clip:<hf id> | vqa:<hf id>",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--port", type=int, default=8750)
    args = parser.parse_args(argv)

    try:
        config = AdapterConfig(
            model=args.model,
            device=args.device,
            batch_size=args.batch_size,
            port=args.port,
        )
        server = AdapterServer(config)
    except Exception as exc:  # model load or config failure at startup
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    print(
        json.dumps(
            {"serving": config.model, "endpoint": f"http://127.0.0.1:{config.port}"}
        )
    )
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
