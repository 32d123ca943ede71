"""Run configuration loaded from a YAML file."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .dataset import Suite
from .scoring import ScorerDescriptor, ScorerKind
from .taxonomy import CombinationLimits, PromptType


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelEndpoint:
    model_id: str
    endpoint: str  # "stub" or an http(s) URL
    guide_id: str = "stub-diffusion"  # image models only


@dataclass(frozen=True)
class RunConfig:
    seed: int
    output_dir: Path
    taxonomy: str = "bundled"  # "bundled" or a file path
    suite: Suite = Suite.SYNTHETIC
    prompt_types: tuple[PromptType, ...] = (PromptType.PROPERTY_VARIATION,)
    limits: CombinationLimits = CombinationLimits()
    images_per_prompt: int = 5
    pairs_per_spec: int = 5
    text_models: tuple[ModelEndpoint, ...] = ()
    image_models: tuple[ModelEndpoint, ...] = ()
    scorers: tuple[ScorerDescriptor, ...] = ()
    prompts_file: Path | None = None  # human-supervised suite input
    image_width: int = 512
    image_height: int = 512
    max_tokens: int = 512
    temperature: float = 1.0
    exclude_failed_attention: bool = False

    @property
    def manifest_path(self) -> Path:
        return self.output_dir / "manifest.json"

    @property
    def scores_path(self) -> Path:
        return self.output_dir / "scores.json"

    @property
    def outcomes_path(self) -> Path:
        return self.output_dir / "outcomes.json"

    @property
    def report_dir(self) -> Path:
        return self.output_dir / "report"


def _check_endpoint(value: str, what: str) -> str:
    if value != "stub" and not (
        value.startswith("http://") or value.startswith("https://")
    ):
        raise ConfigError(f"{what} endpoint must be 'stub' or an http(s) URL, got {value!r}")
    return value


def _parse_models(raw, what: str) -> tuple[ModelEndpoint, ...]:
    models = []
    for entry in raw or ():
        if not isinstance(entry, dict) or "model_id" not in entry:
            raise ConfigError(f"each {what} model needs a model_id")
        models.append(
            ModelEndpoint(
                model_id=str(entry["model_id"]),
                endpoint=_check_endpoint(str(entry.get("endpoint", "stub")), what),
                guide_id=str(entry.get("guide_id", "stub-diffusion")),
            )
        )
    return tuple(models)


def _parse_scorers(raw) -> tuple[ScorerDescriptor, ...]:
    scorers = []
    seen = set()
    for entry in raw or ():
        if not isinstance(entry, dict) or "scorer_id" not in entry:
            raise ConfigError("each scorer needs a scorer_id")
        scorer_id = str(entry["scorer_id"])
        if scorer_id in seen:
            raise ConfigError(f"duplicate scorer_id {scorer_id!r}")
        seen.add(scorer_id)
        kind = ScorerKind(entry.get("kind", "builtin"))
        endpoint = entry.get("endpoint")
        if endpoint is not None:
            endpoint = _check_endpoint(str(endpoint), f"scorer {scorer_id}")
        try:
            scorers.append(
                ScorerDescriptor(
                    scorer_id=scorer_id,
                    kind=kind,
                    endpoint=endpoint,
                    prompt_template=entry.get("prompt_template"),
                    builtin_spec=entry.get("builtin"),
                )
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return tuple(scorers)


def parse_config(data: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping")
    if "seed" not in data:
        raise ConfigError("config requires an explicit seed")
    if "output_dir" not in data:
        raise ConfigError("config requires output_dir")

    base = base_dir or Path.cwd()

    def resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else base / path

    limits_raw = data.get("limits") or {}
    limits = CombinationLimits(
        max_property_combinations=limits_raw.get("max_property_combinations"),
        topics_per_entity=limits_raw.get("topics_per_entity", 10),
        placements_per_entity=limits_raw.get("placements_per_entity", 10),
    )
    try:
        prompt_types = tuple(
            PromptType(p) for p in data.get("prompt_types", ["property_variation"])
        )
        suite = Suite(data.get("suite", "synthetic"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    prompts_file = data.get("prompts_file")
    config = RunConfig(
        seed=int(data["seed"]),
        output_dir=resolve(str(data["output_dir"])),
        taxonomy=str(data.get("taxonomy", "bundled")),
        suite=suite,
        prompt_types=prompt_types,
        limits=limits,
        images_per_prompt=int(data.get("images_per_prompt", 5)),
        pairs_per_spec=int(data.get("pairs_per_spec", 5)),
        text_models=_parse_models(data.get("text_models"), "text"),
        image_models=_parse_models(data.get("image_models"), "image"),
        scorers=_parse_scorers(data.get("scorers")),
        prompts_file=resolve(str(prompts_file)) if prompts_file else None,
        image_width=int(data.get("image_width", 512)),
        image_height=int(data.get("image_height", 512)),
        max_tokens=int(data.get("max_tokens", 512)),
        temperature=float(data.get("temperature", 1.0)),
        exclude_failed_attention=bool(data.get("exclude_failed_attention", False)),
    )
    if config.images_per_prompt < 1:
        raise ConfigError("images_per_prompt must be >= 1")
    if config.suite is Suite.HUMAN_SUPERVISED and config.prompts_file is None:
        raise ConfigError("human_supervised suite requires prompts_file")
    return config


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return parse_config(data, base_dir=path.parent)
