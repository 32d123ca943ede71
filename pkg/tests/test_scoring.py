import base64

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from contrastbench.fixtures import make_synthetic_sample
from contrastbench.pipeline import ImageRecord
from contrastbench.protocol_check import check_scorer_protocol
from contrastbench.score_server import ScoreServer, hash_score_fn
from contrastbench.scoring import (
    ContrastiveVqaSpec,
    DeterminismError,
    GroundTruthError,
    ScoreTable,
    ScorerDescriptor,
    ScorerKind,
    anti_oracle_scorer,
    builtin_scorer,
    constant_scorer,
    contrastive_vqa_score,
    oracle_scorer,
    random_scorer,
    sample_score_requests,
    score_pairs,
)
from contrastbench.utils import png_bytes, text_digest


def image(tag="img", index=0):
    return ImageRecord(
        image_id=f"{tag}-{index}",
        path=f"images/aa/{tag}{index}.png",
        sha256=f"hash-{tag}-{index}",
        image_model_id="t2i",
        seed=index,
    )


# -- contrastive VQA -------------------------------------------------------


def test_vqa_score_values():
    assert contrastive_vqa_score(0.9, 0.05) == pytest.approx(0.85)
    assert contrastive_vqa_score(0.5, 0.5) == 0.0
    assert contrastive_vqa_score(0.0, 1.0) == -1.0


def test_vqa_score_domain():
    with pytest.raises(ValueError):
        contrastive_vqa_score(1.2, 0.0)
    with pytest.raises(ValueError):
        contrastive_vqa_score(0.5, -0.1)


@given(
    p_yes=st.floats(min_value=0, max_value=1),
    p_no=st.floats(min_value=0, max_value=1),
)
@settings(max_examples=200, deadline=None)
def test_vqa_score_antisymmetric(p_yes, p_no):
    assert contrastive_vqa_score(p_yes, p_no) == -contrastive_vqa_score(p_no, p_yes)
    assert -1.0 <= contrastive_vqa_score(p_yes, p_no) <= 1.0


def test_vqa_spec_requires_single_placeholder():
    ContrastiveVqaSpec()
    with pytest.raises(ValueError):
        ContrastiveVqaSpec(question_template="no placeholder")
    with pytest.raises(ValueError):
        ContrastiveVqaSpec(question_template="{prompt} and {prompt}")
    spec = ContrastiveVqaSpec()
    assert "'a red car'" in spec.render("a red car")


# -- builtin scorers --------------------------------------------------------


def test_random_scorer_deterministic_streams():
    keys = [("text a", image("x", 0)), ("text b", image("x", 1))]
    first = [random_scorer(7)(t, i) for t, i in keys]
    second = [random_scorer(7)(t, i) for t, i in keys]
    assert first == second
    assert first != [random_scorer(8)(t, i) for t, i in keys]
    assert all(0.0 <= v < 1.0 for v in first)


def test_constant_scorer():
    fn = constant_scorer(0.5)
    assert fn("anything", image()) == 0.5


def test_oracle_and_anti_oracle():
    sample = make_synthetic_sample(0, n=2)
    oracle = oracle_scorer([sample])
    anti = anti_oracle_scorer([sample])
    t_o = sample.pair.original_text
    t_c = sample.pair.contrast_text
    original_image = sample.images_original.images[0]
    contrast_image = sample.images_contrast.images[0]
    assert oracle(t_o, original_image) == 1.0
    assert oracle(t_c, contrast_image) == 1.0
    assert oracle(t_o, contrast_image) == 0.0
    assert oracle(t_c, original_image) == 0.0
    assert anti(t_o, original_image) == 0.0
    assert anti(t_o, contrast_image) == 1.0


def test_oracle_without_ground_truth_raises():
    sample = make_synthetic_sample(0, n=1)
    oracle = oracle_scorer([sample])
    with pytest.raises(GroundTruthError):
        oracle("unknown text", image("unknown"))


def test_builtin_scorer_resolution():
    desc = ScorerDescriptor("r", ScorerKind.BUILTIN, builtin_spec="random:3")
    assert builtin_scorer(desc)("t", image()) == random_scorer(3)("t", image())
    desc = ScorerDescriptor("c", ScorerKind.BUILTIN, builtin_spec="constant:0.25")
    assert builtin_scorer(desc)("t", image()) == 0.25


def test_descriptor_validation():
    with pytest.raises(ValueError):
        ScorerDescriptor("bad", ScorerKind.REMOTE)
    with pytest.raises(ValueError):
        ScorerDescriptor("bad", ScorerKind.BUILTIN)


# -- score table ------------------------------------------------------------


def test_table_cache_and_determinism_check():
    table = ScoreTable()
    table.add("s", "t1", "i1", 0.5)
    table.add("s", "t1", "i1", 0.5)  # re-adding the same value is fine
    with pytest.raises(DeterminismError):
        table.add("s", "t1", "i1", 0.6)


def test_table_roundtrip(tmp_path):
    table = ScoreTable(provenance={"s": "v1"})
    table.add("s", "t1", "i1", 0.123456789)
    table.add("s", "t2", "i2", -3.5)
    table.mark_failed("s", "t3", "i3")
    path = tmp_path / "scores.json"
    table.save(path)
    again = ScoreTable.load(path)
    assert again.entries() == table.entries()
    assert again.is_failed("s", "t3", "i3")
    assert again.provenance == {"s": "v1"}


def test_score_pairs_builtin_cache_hits():
    sample = make_synthetic_sample(0, n=2)
    requests_ = sample_score_requests(sample)
    assert len(requests_) == 8  # 2 texts x 4 images
    table = ScoreTable()
    desc = ScorerDescriptor("r", ScorerKind.BUILTIN, builtin_spec="random:1")
    score_pairs(requests_, desc, table)
    assert len(table) == 8
    # pre-filled keys are not recomputed (no determinism error even if fn changed)
    score_pairs(requests_, desc, table)
    assert len(table) == 8


# -- remote path via the reference server ------------------------------------


def test_remote_scoring_and_cache(tmp_path):
    sample = make_synthetic_sample(0, n=2)
    reqs = sample_score_requests(sample)
    blobs = {r.path: png_bytes(4, 4, (i, 0, 0)) for i, (_, r) in enumerate(reqs)}
    with ScoreServer(hash_score_fn(5)) as server:
        desc = ScorerDescriptor("remote-1", ScorerKind.REMOTE, endpoint=server.endpoint)
        table = ScoreTable()
        score_pairs(reqs, desc, table, bytes_loader=blobs.__getitem__, batch_size=3)
        assert len(table) == 8
        assert sum(server.request_sizes) == 8
        assert max(server.request_sizes) <= 3
        # second run: all cached, zero remote requests
        before = list(server.request_sizes)
        score_pairs(reqs, desc, table, bytes_loader=blobs.__getitem__, batch_size=3)
        assert server.request_sizes == before


def test_remote_failure_marks_keys_failed():
    sample = make_synthetic_sample(0, n=1)
    reqs = sample_score_requests(sample)
    blobs = {r.path: png_bytes(4, 4, (9, 9, 9)) for _, r in reqs}
    with ScoreServer(hash_score_fn(5)) as server:
        server.inject_failures(100)
        desc = ScorerDescriptor("remote-2", ScorerKind.REMOTE, endpoint=server.endpoint)
        table = ScoreTable()
        score_pairs(
            reqs, desc, table, bytes_loader=blobs.__getitem__,
            retry_backoff=0, sleep=lambda s: None,
        )
        assert len(table) == 0
        text, record = reqs[0]
        assert table.is_failed("remote-2", text_digest(text), record.sha256)


def test_remote_retry_recovers():
    sample = make_synthetic_sample(0, n=1)
    reqs = sample_score_requests(sample)
    blobs = {r.path: png_bytes(4, 4, (9, 9, 9)) for _, r in reqs}
    with ScoreServer(hash_score_fn(5)) as server:
        server.inject_failures(2)
        desc = ScorerDescriptor("remote-3", ScorerKind.REMOTE, endpoint=server.endpoint)
        table = ScoreTable()
        score_pairs(
            reqs, desc, table, bytes_loader=blobs.__getitem__,
            retry_backoff=0, sleep=lambda s: None, batch_size=100,
        )
        assert len(table) == 4
        assert table.failed_count() == 0


def test_nfc_normalization_same_key():
    composed = "café"  # é as a single codepoint
    decomposed = "café"  # e + combining accent
    assert text_digest(composed) == text_digest(decomposed)
    table = ScoreTable()
    table.add("s", text_digest(composed), "i", 0.5)
    assert table.get("s", text_digest(decomposed), "i") == 0.5


def test_reference_server_meets_protocol():
    with ScoreServer() as server:
        check_scorer_protocol(server.endpoint)


def test_reference_server_rejects_bad_requests():
    with ScoreServer() as server:
        url = server.endpoint + "/score"
        good = {
            "texts": ["a", "b"],
            "image_b64": [
                base64.b64encode(png_bytes(2, 2, (0, 0, 0))).decode(),
                base64.b64encode(png_bytes(2, 2, (1, 1, 1))).decode(),
            ],
        }
        assert len(requests.post(url, json=good).json()["scores"]) == 2
        mismatch = dict(good, image_b64=good["image_b64"][:1])
        resp = requests.post(url, json=mismatch)
        assert resp.status_code == 400
        assert "error" in resp.json()
        resp = requests.post(url, json=dict(good, image_b64=["not base64!!"] * 2))
        assert resp.status_code == 400
