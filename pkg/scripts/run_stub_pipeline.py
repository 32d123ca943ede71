"""End-to-end demo run with stub clients and builtin scorers.

Creates runs/demo with a small synthetic suite, scores it with a seeded
random scorer plus the oracle, and writes the report tables. No network.

Usage: python scripts/run_stub_pipeline.py [output_dir]
"""

import sys
from pathlib import Path

import yaml

from contrastbench.cli import main

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/demo")

config = {
    "seed": 42,
    "output_dir": str(OUT),
    "suite": "synthetic",
    "prompt_types": ["property_variation", "entity_variation", "entity_placement"],
    "limits": {
        "max_property_combinations": 6,
        "topics_per_entity": 1,
        "placements_per_entity": 1,
    },
    "images_per_prompt": 3,
    "pairs_per_spec": 2,
    "text_models": [{"model_id": "stub-llm", "endpoint": "stub"}],
    "image_models": [
        {"model_id": "stub-t2i", "endpoint": "stub", "guide_id": "stub-diffusion"}
    ],
    "scorers": [
        {"scorer_id": "random-42", "kind": "builtin", "builtin": "random:42"},
        {"scorer_id": "oracle", "kind": "builtin", "builtin": "oracle"},
        {"scorer_id": "anti-oracle", "kind": "builtin", "builtin": "anti_oracle"},
    ],
}

OUT.parent.mkdir(parents=True, exist_ok=True)
config_path = OUT.parent / f"{OUT.name}-config.yaml"
config_path.write_text(yaml.safe_dump(config))
sys.exit(main(["run-all", "--config", str(config_path)]))
