"""Prompt templates that instruct a text model to write contrastive pairs.

Each template asks for an original prompt plus a contrast prompt that changes
exactly one aspect (a property, an entity definition, or the surrounding
topic), and pins the JSON output format the parser expects.
"""

from __future__ import annotations

from importlib import resources

from .taxonomy import GenerationSpec, PromptType, Taxonomy


class TemplateError(ValueError):
    """A placeholder value required by the template is missing."""


_GUIDE_HEADER = """Consider the following guide on writing a good prompt with {model_name}:
{guide}
"""

_SHARED_RULES = """Pay attention not to use unusual words and make sure that the contents can be displayed as images. Use simple and understandable language. Do not use phrases like "the same" in the contrast prompt.
Write the prompts very short, concise and clear. Do not write more than a single line. Do not write more than 30 words. Think step by step, then return your output in the following format:"""

_TWO_KEY_FORMAT = """{{
    "prompt": "Your prompt here",
    "contrast_prompt": "Your contrast prompt here"
}}"""

PROPERTY_VARIATION_TEMPLATE = (
    _GUIDE_HEADER
    + """Write a prompt for {model_name} that describes a specific scene about "{subject_name}" that involves the concept "{property_name}" ({property_description}).
Additionally, write a contrast prompt that strongly contrasts the original prompt in terms of the concept "{property_name}" ({property_description}), but keeps the wording and content of the prompt the same as far as possible.

For example, if the concept is a color the contrast prompt may use a different color.
"""
    + _SHARED_RULES
    + "\n"
    + _TWO_KEY_FORMAT
)

ENTITY_VARIATION_TEMPLATE = (
    _GUIDE_HEADER
    + """Write a prompt for {model_name} that describes a specific scene about "{subject_name}" involving the entity {entity_name} (Definition: {entity_description}).
Additionally, write a contrast prompt that strongly changes parts of the entity definition {entity_name} (Definition: {entity_description}), but keeps the wording and content of the prompt the same as far as possible.

For example, if the entity is a human that has two arms, the contrast prompt may change the number of arms to three.
"""
    + _SHARED_RULES
    + """
{{
    "prompt": "Your prompt here",
    "varied_definition": "Strongly changed definition of {entity_name} (Definition: {entity_description}). The definition needs to be displayable as an image and it should change the visual appearance of the entity in an unexpected way, ideally not by adding external elements, for example by changing the shape, color or changing numbers.",
    "contrast_prompt": "Your contrast prompt here"
}}"""
)

ENTITY_PLACEMENT_TEMPLATE = (
    _GUIDE_HEADER
    + """Write a prompt for {model_name} that describes a specific scene about "{subject_name}" with the entity {entity_name} (Definition: {entity_description}).
Additionally, write a contrast prompt that places the entity {entity_name} in a picture about "{alt_subject_name}", but keeps the wording and content of the prompt the same as far as possible.

"""
    + _SHARED_RULES
    + "\n"
    + _TWO_KEY_FORMAT
)

# Display names for bundled guides; unknown guide ids fall back to the id.
MODEL_DISPLAY_NAMES = {
    "flux": "FLUX.1",
    "stable-diffusion": "Stable Diffusion 3.5",
    "stub-diffusion": "StubDiffusion",
}


def load_guide(guide_id: str) -> str:
    """Read a bundled prompt-writing guide by id."""
    ref = resources.files("contrastbench").joinpath(f"assets/guides/{guide_id}.txt")
    try:
        return ref.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        raise TemplateError(f"no bundled guide with id {guide_id!r}") from exc


def model_display_name(guide_id: str) -> str:
    return MODEL_DISPLAY_NAMES.get(guide_id, guide_id)


def render_template(spec: GenerationSpec, guide_text: str, tax: Taxonomy) -> str:
    """Fill the template for the spec's prompt type.

    Names and descriptions are resolved from the taxonomy; a missing node or
    an empty guide raises TemplateError.
    """
    if not guide_text.strip():
        raise TemplateError("guide_text must be non-empty")

    subject = tax.find_topic(spec.subject_topic)
    if subject is None:
        raise TemplateError(f"unknown subject topic {spec.subject_topic!r}")
    values = {
        "model_name": model_display_name(spec.model_guide_id),
        "guide": guide_text.strip(),
        "subject_name": subject.name,
    }

    if spec.prompt_type is PromptType.PROPERTY_VARIATION:
        prop = tax.find_property(spec.property or "")
        if prop is None:
            raise TemplateError(f"unknown property {spec.property!r}")
        values["property_name"] = prop.name
        values["property_description"] = prop.description
        return PROPERTY_VARIATION_TEMPLATE.format(**values)

    entity = tax.find_entity(spec.entity or "")
    if entity is None:
        raise TemplateError(f"unknown entity {spec.entity!r}")
    values["entity_name"] = entity.name
    values["entity_description"] = entity.description

    if spec.prompt_type is PromptType.ENTITY_VARIATION:
        return ENTITY_VARIATION_TEMPLATE.format(**values)

    alt = tax.find_topic(spec.alt_topic or "")
    if alt is None:
        raise TemplateError(f"unknown alternative topic {spec.alt_topic!r}")
    values["alt_subject_name"] = alt.name
    return ENTITY_PLACEMENT_TEMPLATE.format(**values)
