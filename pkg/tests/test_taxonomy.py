import copy

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contrastbench.taxonomy import (
    CombinationLimits,
    PromptType,
    TaxonomyError,
    load_bundled_taxonomy,
    parse_taxonomy,
    sample_combinations,
    serialize_taxonomy,
)

from conftest import mini_tax_data

import yaml


def test_minimal_tree_loads():
    tax = parse_taxonomy(
        {
            "properties": [
                {
                    "id": "color",
                    "name": "Color",
                    "description": "colors",
                    "children": [
                        {"id": "color/red", "name": "Red", "description": "red"}
                    ],
                }
            ],
            "topics": [
                {
                    "id": "nature",
                    "name": "Nature",
                    "description": "nature",
                    "entities": [
                        {"id": "nature/tree", "name": "Tree", "description": "a tree"}
                    ],
                }
            ],
        }
    )
    assert len(tax.property_leaves()) == 1
    assert len(tax.leaf_topics()) == 1
    assert len(tax.entities()) == 1
    assert tax.entities()[0].home_topic == "nature"


def test_explicit_home_topic_resolves():
    data = mini_tax_data()
    deer = data["topics"][0]["children"][0]["entities"][0]
    deer["home_topic"] = "nature/fauna"
    tax = parse_taxonomy(data)
    assert tax.find_entity("nature/fauna/deer").home_topic == "nature/fauna"


def test_duplicate_id_names_offender():
    data = mini_tax_data()
    color = data["properties"][0]["children"][0]
    color["children"].append(copy.deepcopy(color["children"][0]))
    with pytest.raises(TaxonomyError, match="attribute/color/red"):
        parse_taxonomy(data)


def test_dangling_home_topic_rejected():
    data = mini_tax_data()
    data["topics"][0]["children"][0]["entities"][0]["home_topic"] = "no/such/topic"
    with pytest.raises(TaxonomyError, match="no/such/topic"):
        parse_taxonomy(data)


def test_top_level_property_leaf_rejected():
    data = mini_tax_data()
    data["properties"].append({"id": "flat", "name": "Flat", "description": "x"})
    with pytest.raises(TaxonomyError, match="flat"):
        parse_taxonomy(data)


def test_property_leaf_needs_description():
    data = mini_tax_data()
    data["properties"][0]["children"][0]["children"][0]["description"] = "  "
    with pytest.raises(TaxonomyError, match="empty description"):
        parse_taxonomy(data)


def test_leaf_topic_needs_entities():
    data = mini_tax_data()
    data["topics"][0]["children"][0]["entities"] = []
    with pytest.raises(TaxonomyError, match="no entities"):
        parse_taxonomy(data)


def test_bundled_taxonomy_valid():
    tax = load_bundled_taxonomy()
    assert len(tax.property_leaves()) > 50
    assert len(tax.leaf_topics()) >= 10
    assert all(t.entities for t in tax.leaf_topics())


def test_round_trip(mini_tax):
    text = serialize_taxonomy(mini_tax)
    again = parse_taxonomy(yaml.safe_load(text))
    assert again == mini_tax


def test_bundled_round_trip():
    tax = load_bundled_taxonomy()
    assert parse_taxonomy(yaml.safe_load(serialize_taxonomy(tax))) == tax


# -- sampling ----------------------------------------------------------------


def test_property_cross_product(mini_tax):
    specs = sample_combinations(mini_tax, PromptType.PROPERTY_VARIATION, seed=0)
    # 2 property leaves x 3 leaf topics
    assert len(specs) == 6
    assert {(s.property, s.subject_topic) for s in specs} == {
        (p, t)
        for p in ("attribute/color/red", "attribute/color/blue")
        for t in ("nature/fauna", "transport/rail", "city/streets")
    }


def test_property_cap_is_deterministic(mini_tax):
    limits = CombinationLimits(max_property_combinations=3)
    a = sample_combinations(mini_tax, PromptType.PROPERTY_VARIATION, 5, limits)
    b = sample_combinations(mini_tax, PromptType.PROPERTY_VARIATION, 5, limits)
    assert a == b
    assert len(a) == 3


def test_entity_placement_avoids_home_topic(mini_tax):
    limits = CombinationLimits(placements_per_entity=10)
    specs = sample_combinations(mini_tax, PromptType.ENTITY_PLACEMENT, 1, limits)
    # 3 entities x min(10, 2 alternatives)
    assert len(specs) == 6
    for spec in specs:
        assert spec.alt_topic != spec.subject_topic
        assert spec.subject_topic == mini_tax.find_entity(spec.entity).home_topic


def test_entity_placement_many_topics():
    data = mini_tax_data()
    extra = [
        {
            "id": f"extra{i}",
            "name": f"Extra {i}",
            "description": "filler topic",
            "entities": [
                {"id": f"extra{i}/thing", "name": "Thing", "description": "a thing"}
            ],
        }
        for i in range(8)
    ]
    data["topics"].extend(extra)  # 11 leaf topics total
    tax = parse_taxonomy(data)
    specs = sample_combinations(
        tax, PromptType.ENTITY_PLACEMENT, 3, CombinationLimits(placements_per_entity=10)
    )
    deer = [s for s in specs if s.entity == "nature/fauna/deer"]
    assert len(deer) == 10
    assert all(s.alt_topic != "nature/fauna" for s in deer)
    assert len({s.alt_topic for s in deer}) == 10


def test_entity_variation_topics(mini_tax):
    specs = sample_combinations(
        mini_tax, PromptType.ENTITY_VARIATION, 2, CombinationLimits(topics_per_entity=2)
    )
    assert len(specs) == 6  # 3 entities x 2 topics
    per_entity = {}
    for spec in specs:
        per_entity.setdefault(spec.entity, set()).add(spec.subject_topic)
    assert all(len(topics) == 2 for topics in per_entity.values())


@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_sampling_is_pure_function_of_seed(seed):
    tax = parse_taxonomy(mini_tax_data())
    for prompt_type in PromptType:
        first = sample_combinations(tax, prompt_type, seed)
        second = sample_combinations(tax, prompt_type, seed)
        assert first == second


def test_empty_section_raises():
    data = mini_tax_data()
    data["properties"] = []
    tax = parse_taxonomy(data)
    with pytest.raises(TaxonomyError, match="property"):
        sample_combinations(tax, PromptType.PROPERTY_VARIATION, 0)
