"""Small builders shared by several test modules."""

from trimodal.documents import Document
from trimodal.encoders import EncoderProfile, make_provider
from trimodal.entities import catalog_from_entity_lists, corpus_entities
from trimodal.fusion import FusionConfig, TriModalEncoder, build_index
from trimodal.lexical import build_vocabulary


def make_index(texts, dim=16, cfg=FusionConfig(), entities=None, seed=0, ids=None):
    ids = ids or [f"d{i:04d}" for i in range(len(texts))]
    corpus = [Document(i, t) for i, t in zip(ids, texts)]
    overrides = dict(zip(ids, entities)) if entities is not None else {}
    lists = corpus_entities(corpus, overrides=overrides)
    encoder = TriModalEncoder(
        make_provider(EncoderProfile(f"test-{dim}", dim, seed=seed)),
        build_vocabulary(corpus),
        catalog_from_entity_lists(lists),
    )
    index = build_index(corpus, encoder, cfg, entity_overrides=dict(zip(ids, lists)))
    return index, encoder
