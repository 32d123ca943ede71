"""Hierarchical taxonomy of image properties, topics, and entities.

The taxonomy is loaded from a YAML file with two top-level keys:

``properties``
    A tree of nodes. Every node carries ``id``, ``name`` and ``description``;
    inner nodes carry ``children``. Leaves are the concrete visual concepts
    used for property-variation prompts.

``topics``
    A tree of nodes with the same base fields. Leaf topics carry ``entities``,
    each with ``id``, ``name``, ``description`` and an optional ``home_topic``
    (defaults to the enclosing leaf topic).

The loaded taxonomy is immutable and safe to share across threads.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import yaml


class TaxonomyError(ValueError):
    """Malformed taxonomy file or violated structural invariant."""


@dataclass(frozen=True)
class EntityRef:
    id: str
    name: str
    description: str
    home_topic: str


@dataclass(frozen=True)
class TopicNode:
    id: str
    name: str
    description: str = ""
    children: tuple["TopicNode", ...] = ()
    entities: tuple[EntityRef, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class PropertyNode:
    id: str
    name: str
    description: str = ""
    children: tuple["PropertyNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class Taxonomy:
    version: str
    properties: tuple[PropertyNode, ...]
    topics: tuple[TopicNode, ...]

    def property_leaves(self) -> list[PropertyNode]:
        leaves: list[PropertyNode] = []

        def walk(node: PropertyNode) -> None:
            if node.is_leaf:
                leaves.append(node)
            for child in node.children:
                walk(child)

        for root in self.properties:
            walk(root)
        return leaves

    def all_topics(self) -> list[TopicNode]:
        out: list[TopicNode] = []

        def walk(node: TopicNode) -> None:
            out.append(node)
            for child in node.children:
                walk(child)

        for root in self.topics:
            walk(root)
        return out

    def leaf_topics(self) -> list[TopicNode]:
        return [t for t in self.all_topics() if t.is_leaf]

    def entities(self) -> list[EntityRef]:
        return [e for t in self.all_topics() for e in t.entities]

    def find_property(self, node_id: str) -> PropertyNode | None:
        def walk(node: PropertyNode) -> PropertyNode | None:
            if node.id == node_id:
                return node
            for child in node.children:
                found = walk(child)
                if found is not None:
                    return found
            return None

        for root in self.properties:
            found = walk(root)
            if found is not None:
                return found
        return None

    def find_topic(self, node_id: str) -> TopicNode | None:
        for topic in self.all_topics():
            if topic.id == node_id:
                return topic
        return None

    def find_entity(self, entity_id: str) -> EntityRef | None:
        for entity in self.entities():
            if entity.id == entity_id:
                return entity
        return None


class PromptType(str, Enum):
    PROPERTY_VARIATION = "property_variation"
    ENTITY_VARIATION = "entity_variation"
    ENTITY_PLACEMENT = "entity_placement"


# The "property" field below shadows the builtin inside the class body.
_builtin_property = property


@dataclass(frozen=True)
class GenerationSpec:
    """One sampled combination to generate a contrastive prompt pair from."""

    prompt_type: PromptType
    subject_topic: str
    property: str | None = None
    entity: str | None = None
    alt_topic: str | None = None
    model_guide_id: str = "default"

    def __post_init__(self) -> None:
        pt = self.prompt_type
        required = {
            PromptType.PROPERTY_VARIATION: ("property",),
            PromptType.ENTITY_VARIATION: ("entity",),
            PromptType.ENTITY_PLACEMENT: ("entity", "alt_topic"),
        }[pt]
        forbidden = {"property", "entity", "alt_topic"} - set(required)
        for name in required:
            if getattr(self, name) is None:
                raise ValueError(f"{pt.value} spec requires field {name!r}")
        for name in forbidden:
            if getattr(self, name) is not None:
                raise ValueError(f"{pt.value} spec must not set field {name!r}")
        if not self.subject_topic:
            raise ValueError("spec requires a subject_topic")

    @_builtin_property
    def key(self) -> str:
        """Stable identity used for idempotency and sample ids."""
        parts = [self.prompt_type.value, self.subject_topic]
        if self.property is not None:
            parts.append(self.property)
        if self.entity is not None:
            parts.append(self.entity)
        if self.alt_topic is not None:
            parts.append(self.alt_topic)
        parts.append(self.model_guide_id)
        return "__".join(p.replace("/", ".") for p in parts)

    @_builtin_property
    def category(self) -> str:
        """Reporting bucket: the varied property id, or the prompt type."""
        if self.prompt_type is PromptType.PROPERTY_VARIATION:
            return self.property or ""
        return self.prompt_type.value


@dataclass(frozen=True)
class CombinationLimits:
    """Caps for desk-scale runs; ``None`` means the full cross product."""

    max_property_combinations: int | None = None
    topics_per_entity: int = 10
    placements_per_entity: int = 10


# ---------------------------------------------------------------------------
# Loading and validation


def _as_str(raw: dict, key: str, where: str, default: str | None = None) -> str:
    value = raw.get(key, default)
    if value is None:
        raise TaxonomyError(f"node {where}: missing field {key!r}")
    if not isinstance(value, str):
        raise TaxonomyError(f"node {where}: field {key!r} must be a string")
    return value


def _parse_property(raw: dict) -> PropertyNode:
    if not isinstance(raw, dict):
        raise TaxonomyError(f"property node must be a mapping, got {type(raw).__name__}")
    node_id = _as_str(raw, "id", str(raw))
    children = tuple(_parse_property(c) for c in raw.get("children") or ())
    return PropertyNode(
        id=node_id,
        name=_as_str(raw, "name", node_id),
        description=_as_str(raw, "description", node_id, default=""),
        children=children,
    )


def _parse_topic(raw: dict) -> TopicNode:
    if not isinstance(raw, dict):
        raise TaxonomyError(f"topic node must be a mapping, got {type(raw).__name__}")
    node_id = _as_str(raw, "id", str(raw))
    children = tuple(_parse_topic(c) for c in raw.get("children") or ())
    entities = []
    for raw_entity in raw.get("entities") or ():
        if not isinstance(raw_entity, dict):
            raise TaxonomyError(f"entity under topic {node_id} must be a mapping")
        ent_id = _as_str(raw_entity, "id", f"entity under {node_id}")
        entities.append(
            EntityRef(
                id=ent_id,
                name=_as_str(raw_entity, "name", ent_id),
                description=_as_str(raw_entity, "description", ent_id, default=""),
                home_topic=_as_str(raw_entity, "home_topic", ent_id, default=node_id),
            )
        )
    return TopicNode(
        id=node_id,
        name=_as_str(raw, "name", node_id),
        description=_as_str(raw, "description", node_id, default=""),
        children=children,
        entities=tuple(entities),
    )


def validate_taxonomy(tax: Taxonomy) -> None:
    """Check all structural invariants; raises TaxonomyError naming offenders."""
    seen: set[str] = set()

    def check_unique(node_id: str) -> None:
        if node_id in seen:
            raise TaxonomyError(f"duplicate id {node_id!r}")
        seen.add(node_id)

    def walk_property(node: PropertyNode, depth: int) -> None:
        check_unique(node.id)
        if depth == 0 and node.is_leaf:
            raise TaxonomyError(
                f"property {node.id!r}: top-level nodes must be groups with children"
            )
        if node.is_leaf and not node.description.strip():
            raise TaxonomyError(f"property leaf {node.id!r}: empty description")
        for child in node.children:
            walk_property(child, depth + 1)

    for root in tax.properties:
        walk_property(root, 0)

    def walk_topic(node: TopicNode) -> None:
        check_unique(node.id)
        if node.is_leaf and not node.entities:
            raise TaxonomyError(f"leaf topic {node.id!r}: no entities")
        if node.children and node.entities:
            raise TaxonomyError(f"topic {node.id!r}: carries both children and entities")
        for entity in node.entities:
            check_unique(entity.id)
            if not entity.description.strip():
                raise TaxonomyError(f"entity {entity.id!r}: empty description")
        for child in node.children:
            walk_topic(child)

    for root in tax.topics:
        walk_topic(root)

    topic_ids = {t.id for t in tax.all_topics()}
    for entity in tax.entities():
        if entity.home_topic not in topic_ids:
            raise TaxonomyError(
                f"entity {entity.id!r}: home_topic {entity.home_topic!r} does not exist"
            )


def parse_taxonomy(data: dict) -> Taxonomy:
    if not isinstance(data, dict):
        raise TaxonomyError("taxonomy file must contain a mapping at the top level")
    tax = Taxonomy(
        version=str(data.get("version", "1")),
        properties=tuple(_parse_property(p) for p in data.get("properties") or ()),
        topics=tuple(_parse_topic(t) for t in data.get("topics") or ()),
    )
    validate_taxonomy(tax)
    return tax


def load_taxonomy(path: Path | str) -> Taxonomy:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise TaxonomyError(f"cannot read taxonomy file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise TaxonomyError(f"parse error in {path}: {exc}") from exc
    return parse_taxonomy(data)


def load_bundled_taxonomy() -> Taxonomy:
    """The default taxonomy shipped with the package."""
    ref = resources.files("contrastbench").joinpath("assets/taxonomy.yaml")
    data = yaml.safe_load(ref.read_text(encoding="utf-8"))
    return parse_taxonomy(data)


def _property_to_raw(node: PropertyNode) -> dict:
    raw: dict = {"id": node.id, "name": node.name, "description": node.description}
    if node.children:
        raw["children"] = [_property_to_raw(c) for c in node.children]
    return raw


def _topic_to_raw(node: TopicNode) -> dict:
    raw: dict = {"id": node.id, "name": node.name, "description": node.description}
    if node.children:
        raw["children"] = [_topic_to_raw(c) for c in node.children]
    if node.entities:
        raw["entities"] = [
            {
                "id": e.id,
                "name": e.name,
                "description": e.description,
                "home_topic": e.home_topic,
            }
            for e in node.entities
        ]
    return raw


def serialize_taxonomy(tax: Taxonomy) -> str:
    data = {
        "version": tax.version,
        "properties": [_property_to_raw(p) for p in tax.properties],
        "topics": [_topic_to_raw(t) for t in tax.topics],
    }
    return yaml.safe_dump(data, sort_keys=False, allow_unicode=True)


# ---------------------------------------------------------------------------
# Combination sampling


def sample_combinations(
    tax: Taxonomy,
    prompt_type: PromptType,
    seed: int,
    limits: CombinationLimits | None = None,
) -> list[GenerationSpec]:
    """Deterministically sample generation specs for one prompt type.

    property_variation pairs every property leaf with every leaf topic
    (optionally capped), entity_variation draws ``topics_per_entity`` distinct
    topics per entity, and entity_placement draws ``placements_per_entity``
    distinct alternative topics per entity, never its home topic. The same
    (taxonomy, type, seed, limits) always yields the same list.
    """
    limits = limits or CombinationLimits()
    rng = random.Random(seed)
    topics = tax.leaf_topics()

    if prompt_type is PromptType.PROPERTY_VARIATION:
        leaves = tax.property_leaves()
        if not leaves:
            raise TaxonomyError("taxonomy has no property leaves")
        if not topics:
            raise TaxonomyError("taxonomy has no leaf topics")
        specs = [
            GenerationSpec(
                prompt_type=prompt_type, subject_topic=topic.id, property=leaf.id
            )
            for leaf in leaves
            for topic in topics
        ]
        cap = limits.max_property_combinations
        if cap is not None and cap < len(specs):
            keep = sorted(rng.sample(range(len(specs)), cap))
            specs = [specs[i] for i in keep]
        return specs

    entities = tax.entities()
    if not entities:
        raise TaxonomyError("taxonomy has no entities")
    if not topics:
        raise TaxonomyError("taxonomy has no leaf topics")

    specs = []
    if prompt_type is PromptType.ENTITY_VARIATION:
        topic_ids = [t.id for t in topics]
        for entity in entities:
            k = min(limits.topics_per_entity, len(topic_ids))
            for topic_id in rng.sample(topic_ids, k):
                specs.append(
                    GenerationSpec(
                        prompt_type=prompt_type,
                        subject_topic=topic_id,
                        entity=entity.id,
                    )
                )
        return specs

    if prompt_type is PromptType.ENTITY_PLACEMENT:
        for entity in entities:
            alternatives = [t.id for t in topics if t.id != entity.home_topic]
            k = min(limits.placements_per_entity, len(alternatives))
            for alt in rng.sample(alternatives, k):
                specs.append(
                    GenerationSpec(
                        prompt_type=prompt_type,
                        subject_topic=entity.home_topic,
                        entity=entity.id,
                        alt_topic=alt,
                    )
                )
        return specs

    raise ValueError(f"unknown prompt type: {prompt_type!r}")
