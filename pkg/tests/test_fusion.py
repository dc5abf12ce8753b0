import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trimodal.documents import Document
from trimodal.encoders import EncoderProfile, make_provider
from trimodal.entities import EntityCatalog
from trimodal.fusion import (
    FingerprintMismatchError,
    FusionConfig,
    HybridVector,
    TriModalEmbedding,
    TriModalEncoder,
    build_index,
    fuse,
    normalize_block,
    per_modality_scores,
    search,
    search_batch,
)
from trimodal.lexical import SparseVector, build_vocabulary
from helpers import make_index
from oracles import ref_topk

SENTENCES = [
    "Marie Curie studied radium in Paris with Pierre Curie.",
    "The Eiffel Tower was finished in Paris for the World Fair.",
    "Ada Lovelace wrote notes on the Analytical Engine of Charles Babbage.",
    "Alan Turing broke codes at Bletchley Park during the war.",
    "The Danube flows through Vienna and Budapest to the Black Sea.",
]


def test_normalize_block():
    assert np.allclose(normalize_block(np.array([3.0, 4.0])), [0.6, 0.8], atol=1e-15)
    assert not normalize_block(np.zeros(3)).any()
    u = np.array([0.0, 1.0, 0.0])
    assert np.max(np.abs(normalize_block(u) - u)) <= 1e-15


def sparse(dense):
    dense = np.asarray(dense, float)
    nz = np.nonzero(dense)[0]
    return SparseVector(nz, dense[nz], dense.shape[0])


def _tri(s, t, g):
    return TriModalEmbedding(np.asarray(s, float), sparse(t), np.asarray(g, float))


def test_fuse_norms():
    h = fuse(_tri([1, 0], [0, 1, 0], [0, 1]), FusionConfig())
    assert np.allclose(h.values, [1, 0, 0, 1, 0, 0, 1] / np.sqrt(3), atol=1e-15)
    h = fuse(_tri([2, 0], [0, 0, 5], [0, 0]), FusionConfig())
    assert np.allclose(h.values, [1, 0, 0, 0, 1, 0, 0] / np.sqrt(2), atol=1e-15)
    z = fuse(_tri([0, 0], [0], [0, 0]), FusionConfig())
    assert z.is_zero and not z.values.any()
    with pytest.raises(ValueError):
        fuse(_tri([1], [1], [1]), FusionConfig(), dims=(2, 1, 1))


def test_fusion_config_validation():
    with pytest.raises(ValueError):
        FusionConfig(-1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        FusionConfig(0.0, 0.0, 0.0)


def test_build_index_small():
    index, _ = make_index(SENTENCES[:3])
    assert len(index) == 3
    norms = np.linalg.norm(index.matrix, axis=1)
    assert np.all((np.abs(norms - 1) <= 1e-9) | (norms == 0))
    assert index.dims == (16, index.vocabulary.dim, 16)


def test_build_index_duplicate_ids():
    with pytest.raises(ValueError, match="duplicate"):
        make_index(SENTENCES[:2], ids=["x", "x"])


def test_build_index_rejects_foreign_vocabulary():
    corpus = [Document("a", "one"), Document("b", "two")]
    enc = TriModalEncoder(
        make_provider(EncoderProfile("t", 4)),
        build_vocabulary(["one", "two", "three"]),
        EntityCatalog((), (), 2),
    )
    with pytest.raises(ValueError):
        build_index(corpus, enc, FusionConfig())


@pytest.mark.slow
def test_scifact_sized_corpus():
    rng = np.random.default_rng(1)
    words = [f"w{i}" for i in range(3000)]
    texts = [" ".join(rng.choice(words, 12)) for _ in range(5183)]
    index, _ = make_index(texts, dim=8)
    assert index.matrix.shape[0] == 5183


def test_self_similarity_and_large_k():
    index, enc = make_index(SENTENCES)
    for i, doc_id in enumerate(index.doc_ids):
        q = HybridVector(index.matrix[i].copy(), fingerprint=enc.fingerprint)
        top = search(index, q, 1)[0]
        assert top[0] == doc_id and abs(top[1] - 1.0) <= 1e-9
    hits = search(index, HybridVector(index.matrix[0].copy()), 50)
    assert len(hits) == len(SENTENCES)
    assert [s for _, s in hits] == sorted((s for _, s in hits), reverse=True)


def test_search_ties_break_by_doc_id():
    index, _ = make_index(["same words", "same words", "other"], ids=["b", "a", "c"])
    hits = search(index, HybridVector(index.row("a").copy()), 2)
    assert [d for d, _ in hits] == ["a", "b"]


def test_search_matches_bruteforce():
    rng = np.random.default_rng(3)
    index, _ = make_index([" ".join(rng.choice(list("abcdefghijklmnop"), 6)) for _ in range(200)])
    rows = index.matrix.tolist()
    for _ in range(100):
        v = rng.standard_normal(index.matrix.shape[1])
        v /= np.linalg.norm(v)
        got = search(index, HybridVector(v), 10)
        want = ref_topk(rows, index.doc_ids, v.tolist(), 10)
        assert [d for d, _ in got] == [d for d, _ in want]
        assert max(abs(a[1] - b[1]) for a, b in zip(got, want)) <= 1e-9


def test_search_rejects_bad_queries():
    index, enc = make_index(SENTENCES)
    with pytest.raises(FingerprintMismatchError, match="index/query encoder mismatch"):
        search(index, HybridVector(index.matrix[0].copy(), fingerprint="other"), 3)
    with pytest.raises(ValueError):
        search(index, HybridVector(np.ones(3)), 3)
    with pytest.raises(ValueError):
        search(index, HybridVector(index.matrix[0].copy()), 0)


def test_search_batch_equals_single():
    index, enc = make_index(SENTENCES)
    qs = [enc.encode_query(t, index.config)[1] for t in ["Paris tower", "codes war", "river"]]
    batched = search_batch(index, qs, 4, chunk=2)
    single = [search(index, q, 4) for q in qs]
    # BLAS may round a matrix-matrix product differently from matrix-vector
    for b, s in zip(batched, single):
        assert [d for d, _ in b] == [d for d, _ in s]
        assert np.allclose([x for _, x in b], [x for _, x in s], rtol=0, atol=1e-12)


def test_per_modality_identical_text():
    index, enc = make_index(SENTENCES)
    tri, _ = enc.encode_query(SENTENCES[2], index.config)
    cs, ct, cg = per_modality_scores(index, tri, index.doc_ids[2])
    assert (cs, ct, cg) == pytest.approx((1.0, 1.0, 1.0), abs=1e-9)
    with pytest.raises(KeyError):
        per_modality_scores(index, tri, "nope")


def test_per_modality_entity_only_overlap():
    texts = ["radium research notes", "cooking pasta at home", "river trips", "garden tools"]
    ents = [["Marie Curie"], [], [], []]
    index, enc = make_index(texts, entities=ents)
    tri, _ = enc.encode_query("who is Marie Curie", index.config)
    cs, ct, cg = per_modality_scores(index, tri, "d0000")
    assert ct == 0.0
    assert cg > ct and cg == pytest.approx(1.0, abs=1e-9)
    # zero graph block on the document side
    assert per_modality_scores(index, tri, "d0001")[2] == 0.0


def test_zero_scale_modality_reports_zero():
    index, enc = make_index(SENTENCES, cfg=FusionConfig(1.0, 1.0, 0.0))
    tri, _ = enc.encode_query(SENTENCES[0], index.config)
    assert per_modality_scores(index, tri, index.doc_ids[0])[2] == 0.0



@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 10.0))
def test_fusion_identity_and_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    q = _tri(rng.standard_normal(5), rng.random(7) + 0.01, rng.standard_normal(5))
    d = _tri(rng.standard_normal(5), rng.random(7) + 0.01, rng.standard_normal(5))
    cfg = FusionConfig(c, c, c)
    hq, hd = fuse(q, cfg), fuse(d, cfg)
    per = [normalize_block(a) @ normalize_block(b) for a, b in zip(q.blocks(), d.blocks())]
    assert abs(hq.values @ hd.values - math.fsum(per) / 3) <= 1e-9
    assert np.allclose(hq.values, fuse(q, FusionConfig()).values, atol=1e-15)
    assert abs(np.linalg.norm(hq.values) - 1.0) <= 1e-9
