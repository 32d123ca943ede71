import pytest

from contrastbench.taxonomy import parse_taxonomy


def mini_tax_data(**overrides):
    data = {
        "version": "test",
        "properties": [
            {
                "id": "attribute",
                "name": "Attribute",
                "description": "attributes",
                "children": [
                    {
                        "id": "attribute/color",
                        "name": "Color",
                        "description": "colors",
                        "children": [
                            {
                                "id": "attribute/color/red",
                                "name": "Red",
                                "description": "the color red",
                            },
                            {
                                "id": "attribute/color/blue",
                                "name": "Blue",
                                "description": "the color blue",
                            },
                        ],
                    }
                ],
            }
        ],
        "topics": [
            {
                "id": "nature",
                "name": "Nature",
                "description": "natural scenes",
                "children": [
                    {
                        "id": "nature/fauna",
                        "name": "Fauna",
                        "description": "wild animals",
                        "entities": [
                            {
                                "id": "nature/fauna/deer",
                                "name": "Deer",
                                "description": "a hoofed animal with antlers",
                            }
                        ],
                    }
                ],
            },
            {
                "id": "transport",
                "name": "Transportation",
                "description": "vehicles",
                "children": [
                    {
                        "id": "transport/rail",
                        "name": "Rail",
                        "description": "trains",
                        "entities": [
                            {
                                "id": "transport/rail/locomotive",
                                "name": "Steam Locomotive",
                                "description": "a steam-driven rail engine",
                            }
                        ],
                    }
                ],
            },
            {
                "id": "city",
                "name": "City",
                "description": "urban scenes",
                "children": [
                    {
                        "id": "city/streets",
                        "name": "Streets",
                        "description": "street scenes",
                        "entities": [
                            {
                                "id": "city/streets/bus",
                                "name": "Bus",
                                "description": "a long passenger road vehicle",
                            }
                        ],
                    }
                ],
            },
        ],
    }
    data.update(overrides)
    return data


@pytest.fixture
def mini_tax():
    return parse_taxonomy(mini_tax_data())
