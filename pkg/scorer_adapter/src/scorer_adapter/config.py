"""Adapter configuration."""

from __future__ import annotations

from dataclasses import dataclass

# Model identifier forms:
#   stub-embedding            deterministic hash-based embedding similarity
#   stub-vqa                  deterministic hash-based yes/no probabilities
#   clip:<hf model id>        sentence-transformers image/text embedding model
#   vqa:<hf model id>         transformers VQA model with yes/no token scoring
SUPPORTED_PREFIXES = ("stub-embedding", "stub-vqa", "clip:", "vqa:")


@dataclass(frozen=True)
class AdapterConfig:
    model: str = "stub-embedding"
    device: str = "cpu"
    batch_size: int = 8
    port: int = 8750

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.model.startswith(SUPPORTED_PREFIXES):
            raise ValueError(
                f"unsupported model {self.model!r}; expected one of {SUPPORTED_PREFIXES}"
            )
