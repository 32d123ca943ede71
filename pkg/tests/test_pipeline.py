import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contrastbench.clients import (
    ClientError,
    StubImageGenClient,
    StubTextGenClient,
    with_retries,
)
from contrastbench.dataset import ImageStore
from contrastbench.pipeline import (
    PromptPair,
    Rejection,
    RejectionReason,
    generate_images,
    generate_prompt_pairs,
    parse_llm_output,
)
from contrastbench.taxonomy import GenerationSpec, PromptType

PT = PromptType.PROPERTY_VARIATION


def spec_for(topic="nature/fauna", prop="attribute/color/red"):
    return GenerationSpec(prompt_type=PT, subject_topic=topic, property=prop)


# -- parsing -------------------------------------------------------------


def test_parse_valid_object():
    raw = json.dumps(
        {
            "prompt": "A red steam locomotive in a valley.",
            "contrast_prompt": "A blue steam locomotive in a valley.",
        }
    )
    pair = parse_llm_output(raw, PT)
    assert isinstance(pair, PromptPair)
    assert pair.original_text.startswith("A red")
    assert pair.contrast_text.startswith("A blue")


def test_parse_tolerates_reasoning_text():
    raw = (
        "First I consider the scene. {not json} Then I settle on:\n"
        '{"prompt": "A red car.", "contrast_prompt": "A blue car."}\nDone.'
    )
    pair = parse_llm_output(raw, PT)
    assert isinstance(pair, PromptPair)
    assert pair.original_text == "A red car."


def test_parse_takes_last_object():
    raw = (
        '{"prompt": "draft one", "contrast_prompt": "draft two"}\n'
        'On reflection: {"prompt": "A red car.", "contrast_prompt": "A blue car."}'
    )
    pair = parse_llm_output(raw, PT)
    assert pair.original_text == "A red car."


def test_parse_refusal_is_no_object():
    result = parse_llm_output("I cannot help with that.", PT)
    assert result == Rejection(RejectionReason.NO_OBJECT)


def test_parse_missing_key():
    result = parse_llm_output('{"prompt": "only one"}', PT)
    assert isinstance(result, Rejection)
    assert result.reason is RejectionReason.MISSING_KEY
    assert result.detail == "contrast_prompt"


def test_parse_empty_field():
    raw = json.dumps({"prompt": "A red car.", "contrast_prompt": "   "})
    result = parse_llm_output(raw, PT)
    assert result.reason is RejectionReason.EMPTY_FIELD


def test_parse_identical_texts():
    raw = json.dumps({"prompt": "A red car.", "contrast_prompt": "A red car."})
    assert parse_llm_output(raw, PT).reason is RejectionReason.IDENTICAL_TEXTS


def test_parse_token_bound():
    long_text = " ".join(["word"] * 181)
    raw = json.dumps({"prompt": long_text, "contrast_prompt": "short text"})
    assert parse_llm_output(raw, PT).reason is RejectionReason.TOO_LONG
    ok = json.dumps({"prompt": " ".join(["word"] * 180), "contrast_prompt": "short"})
    assert isinstance(parse_llm_output(ok, PT), PromptPair)


def test_parse_entity_variation_requires_definition():
    raw = json.dumps({"prompt": "A deer.", "contrast_prompt": "A strange deer."})
    result = parse_llm_output(raw, PromptType.ENTITY_VARIATION)
    assert result.reason is RejectionReason.MISSING_KEY
    assert result.detail == "varied_definition"


@given(st.text(max_size=300))
@settings(max_examples=300, deadline=None)
def test_parse_never_raises_or_fabricates(raw):
    result = parse_llm_output(raw, PT)
    if isinstance(result, PromptPair):
        assert result.original_text and result.contrast_text
        assert result.original_text != result.contrast_text
    else:
        assert isinstance(result, Rejection)


# -- prompt-pair generation ----------------------------------------------


class CountingStub(StubTextGenClient):
    pass


def test_generate_prompt_pairs_counts(mini_tax):
    specs = [spec_for(), spec_for(prop="attribute/color/blue")]
    client = StubTextGenClient()
    result = generate_prompt_pairs(
        specs, client, 3, tax=mini_tax, text_model_id="stub-llm",
        guide_loader=lambda g: "short guide",
    )
    assert len(result.pairs) == 6
    assert not result.rejections.counts
    assert client.calls == 2
    assert {p.spec.key for p in result.pairs} == {s.key for s in specs}


def test_generate_skips_existing_specs(mini_tax):
    specs = [spec_for(), spec_for(prop="attribute/color/blue")]
    client = StubTextGenClient()
    done = {specs[0].key, specs[1].key}
    result = generate_prompt_pairs(
        specs, client, 3, tax=mini_tax, text_model_id="m",
        guide_loader=lambda g: "guide", existing_keys=done,
    )
    assert client.calls == 0
    assert result.pairs == []
    assert result.skipped_specs == 2


class MalformedClient:
    def complete(self, model, prompt, max_tokens, temperature, count):
        return [
            "no object here",
            '{"prompt": "A red car."}',
            json.dumps({"prompt": "A red car.", "contrast_prompt": "A blue car."}),
        ]


def test_generate_counts_rejections(mini_tax):
    result = generate_prompt_pairs(
        [spec_for()], MalformedClient(), 3, tax=mini_tax, text_model_id="m",
        guide_loader=lambda g: "guide",
    )
    assert len(result.pairs) == 1
    assert result.rejections.counts == {"no_object": 1, "missing_key": 1}


class FlakyClient:
    def __init__(self, failures):
        self.failures = failures
        self.calls = 0

    def complete(self, model, prompt, max_tokens, temperature, count):
        self.calls += 1
        if self.failures > 0:
            self.failures -= 1
            raise ClientError("transient")
        return [json.dumps({"prompt": "A red car.", "contrast_prompt": "A blue car."})]


def test_transport_failure_fails_spec_not_run(mini_tax):
    client = FlakyClient(failures=99)
    result = generate_prompt_pairs(
        [spec_for(), spec_for(prop="attribute/color/blue")],
        client, 1, tax=mini_tax, text_model_id="m",
        guide_loader=lambda g: "guide", retry_backoff=0, sleep=lambda s: None,
    )
    # both specs failed after 3 attempts each, run continued
    assert client.calls == 6
    assert len(result.rejections.failed_specs) == 2
    assert result.pairs == []


def test_retries_recover(mini_tax):
    client = FlakyClient(failures=2)
    result = generate_prompt_pairs(
        [spec_for()], client, 1, tax=mini_tax, text_model_id="m",
        guide_loader=lambda g: "guide", retry_backoff=0, sleep=lambda s: None,
    )
    assert len(result.pairs) == 1
    assert client.calls == 3


def test_retry_backoff_schedule():
    waits = []
    attempts = {"n": 0}

    def failing():
        attempts["n"] += 1
        raise ClientError("nope")

    with pytest.raises(ClientError):
        with_retries(failing, attempts=3, backoff=0.5, sleep=waits.append)
    assert attempts["n"] == 3
    assert waits == [0.5, 1.0]


def test_stub_generation_reproducible(mini_tax):
    def run():
        result = generate_prompt_pairs(
            [spec_for()], StubTextGenClient(), 4, tax=mini_tax,
            text_model_id="m", guide_loader=lambda g: "guide",
        )
        return [(p.original_text, p.contrast_text, p.raw_response) for p in result.pairs]

    assert run() == run()


# -- image generation ------------------------------------------------------


def make_pair(**kwargs):
    defaults = dict(
        original_text="A red car.", contrast_text="A blue car.", text_model_id="m"
    )
    defaults.update(kwargs)
    return PromptPair(**defaults)


def test_generate_images_both_sides(tmp_path):
    store = ImageStore(tmp_path)
    client = StubImageGenClient()
    original, contrast = generate_images(
        make_pair(), client, 5, image_model_id="t2i", store=store, sample_key="s1"
    )
    assert len(original.images) == 5 and len(contrast.images) == 5
    assert original.count == contrast.count == 5
    for record in original.images + contrast.images:
        assert (tmp_path / record.path).exists()
        assert record.image_model_id == "t2i"
    # seeds recorded and deterministic
    again = generate_images(
        make_pair(), StubImageGenClient(), 5, image_model_id="t2i",
        store=store, sample_key="s1",
    )
    assert [r.seed for r in again[0].images] == [r.seed for r in original.images]
    assert [r.sha256 for r in again[0].images] == [r.sha256 for r in original.images]


def test_negation_mode_conditions_contrast_on_alt_text(tmp_path):
    store = ImageStore(tmp_path)
    client = StubImageGenClient()
    pair = make_pair(
        original_text="A cottage and an elder.",
        contrast_text="A cottage and no elder.",
    )
    generate_images(
        pair, client, 2, negation_mode=True, alt_text="A cottage.",
        image_model_id="t2i", store=store, sample_key="s2",
    )
    contrast_prompts = client.prompts_seen[2:]
    assert contrast_prompts == ["A cottage.", "A cottage."]
    # the pair itself still carries the negated evaluation text
    assert pair.contrast_text == "A cottage and no elder."


def test_negation_mode_requires_alt_text(tmp_path):
    with pytest.raises(ValueError, match="alt_text"):
        generate_images(
            make_pair(), StubImageGenClient(), 1, negation_mode=True,
            image_model_id="t2i", store=ImageStore(tmp_path), sample_key="s3",
        )


class FailingImageClient:
    def __init__(self, fail_prompts):
        self.fail_prompts = fail_prompts

    def generate(self, model, prompt, seed, width, height):
        if prompt in self.fail_prompts:
            raise ClientError("boom")
        return StubImageGenClient().generate(model, prompt, seed, width, height)


def test_failed_side_marks_unusable(tmp_path):
    pair = make_pair()
    client = FailingImageClient({pair.contrast_text})
    original, contrast = generate_images(
        pair, client, 1, image_model_id="t2i", store=ImageStore(tmp_path),
        sample_key="s4", retry_backoff=0, sleep=lambda s: None,
    )
    assert original.usable
    assert not contrast.usable
    assert contrast.count == 1 and len(contrast.images) == 0


def test_n_must_be_positive(tmp_path):
    with pytest.raises(ValueError):
        generate_images(
            make_pair(), StubImageGenClient(), 0, image_model_id="t2i",
            store=ImageStore(tmp_path), sample_key="s5",
        )
