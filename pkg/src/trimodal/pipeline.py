"""End-to-end orchestration: offline indexing, single queries, batch evaluation."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from trimodal.config import MOCK_LLM_URL, PipelineConfig
from trimodal.documents import Document
from trimodal.encoders import make_provider
from trimodal.entities import catalog_from_entity_lists, corpus_entities, load_entity_sidecar
from trimodal.evaluation.beir import DatasetError, load_documents, load_beir
from trimodal.evaluation.metrics import MetricReport, evaluate_run
from trimodal.evaluation.runs import RunResult, write_run
from trimodal.evaluation.tables import ndcg_cutoff_table, pre_rerank_table, rerank_table
from trimodal.fusion import (
    HybridIndex,
    TriModalEmbedding,
    TriModalEncoder,
    build_index,
    fuse,
    per_modality_scores,
    search_batch,
)
from trimodal.lexical import build_vocabulary
from trimodal.rerank import Candidate, HttpLLMClient, LLMClient, MockLLM, Reranker, RerankOutcome
from trimodal.storage import load_index, save_index

log = logging.getLogger(__name__)

QUERY_BATCH = 256


class ConfigMismatchError(ValueError):
    pass


def _provider(cfg: PipelineConfig):
    e = cfg.encoder
    return make_provider(
        cfg.profile,
        batch_size=e.batch_size,
        max_in_flight=e.max_in_flight,
        timeout=e.timeout,
        retries=e.retries,
        backoff=e.backoff,
    )


def llm_client(cfg: PipelineConfig) -> LLMClient:
    llm = cfg.rerank.llm
    if llm.base_url == MOCK_LLM_URL:
        opts = dict(llm.mock)
        if "weights" in opts:
            opts["weights"] = tuple(opts["weights"])
        opts.setdefault("seed", cfg.seed)
        return MockLLM(**opts)
    return HttpLLMClient(
        llm.base_url, llm.model, timeout=llm.timeout, retries=llm.retries, backoff=llm.backoff
    )


def make_reranker(cfg: PipelineConfig, client: LLMClient | None = None) -> Reranker | None:
    if cfg.rerank.mode == "none":
        return None
    return Reranker(
        client or llm_client(cfg),
        mode=cfg.rerank.mode,  # type: ignore[arg-type]
        cap=cfg.rerank.candidates,
        snippet_chars=cfg.rerank.snippet_chars,
        static_weights=cfg.static_weights,
    )


def load_corpus(cfg: PipelineConfig) -> list[Document]:
    if not cfg.dataset_dir.is_dir():
        raise DatasetError("dataset directory does not exist", cfg.dataset_dir)
    return load_documents(cfg.dataset_dir / "corpus.jsonl", "corpus")


def run_index(cfg: PipelineConfig) -> tuple[HybridIndex, dict]:
    """Offline loop: build vocabulary and entity catalog, embed, fuse, store."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    corpus = load_corpus(cfg)
    if not corpus:
        raise DatasetError("corpus is empty", cfg.dataset_dir / "corpus.jsonl")
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    vocab = build_vocabulary(corpus, cfg.fusion.max_terms)
    timings["vocabulary"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    overrides = load_entity_sidecar(cfg.entity_sidecar) if cfg.entity_sidecar else {}
    entity_lists = corpus_entities(corpus, overrides=overrides)
    catalog = catalog_from_entity_lists(entity_lists)
    timings["entities"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    encoder = TriModalEncoder(_provider(cfg), vocab, catalog)
    index = build_index(
        corpus,
        encoder,
        cfg.fusion_config,
        entity_overrides=dict(zip((d.doc_id for d in corpus), entity_lists)),
        fingerprints={"config": cfg.index_hash()},
    )
    timings["embed_fuse"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cfg.index_path.parent.mkdir(parents=True, exist_ok=True)
    save_index(index, cfg.index_path)
    timings["write"] = time.perf_counter() - t0

    report = {
        "index": str(cfg.index_path),
        "documents": len(index),
        "vocabulary_size": vocab.dim,
        "entity_count": len(catalog),
        "zero_vectors": int(index.zero_rows.size),
        "hybrid_dim": int(index.matrix.shape[1]),
        "encoder": index.encoder_profile,
        "config_hash": cfg.index_hash(),
        "timings_s": {k: round(v, 4) for k, v in timings.items()},
    }
    cfg.build_report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return index, report


def open_index(cfg: PipelineConfig) -> tuple[HybridIndex, TriModalEncoder]:
    if not cfg.index_path.is_file():
        raise DatasetError("index file not found; run `trimodal index` first", cfg.index_path)
    index = load_index(cfg.index_path)
    encoder = TriModalEncoder(_provider(cfg), index.vocabulary, index.catalog)
    return index, encoder


def _candidates(
    index: HybridIndex,
    tri: TriModalEmbedding,
    hits: Sequence[tuple[str, float]],
    docs: dict[str, Document],
) -> list[Candidate]:
    out = []
    for doc_id, score in hits:
        cs, ct, cg = per_modality_scores(index, tri, doc_id)
        doc = docs.get(doc_id)
        out.append(
            Candidate(
                doc_id, cs, ct, cg, score,
                title=doc.title if doc else "", snippet=doc.text if doc else "",
            )
        )
    return out


@dataclass
class QueryResult:
    query: str
    hits: list[tuple[str, float]]
    candidates: list[Candidate] = field(default_factory=list)
    outcome: RerankOutcome | None = None
    titles: dict[str, str] = field(default_factory=dict)

    @property
    def ranked(self) -> list[tuple[str, float]]:
        """Final order: reranked head, then the rest of the retrieved list."""
        if self.outcome is None:
            return list(self.hits)
        head = [d for d, _ in self.outcome.ranked]
        seen = set(head)
        order = head + [d for d, _ in self.hits if d not in seen]
        return [(d, float(len(order) - i)) for i, d in enumerate(order)]


def _retrieve(
    index: HybridIndex,
    encoder: TriModalEncoder,
    texts: Sequence[str],
    depth: int,
) -> tuple[list[TriModalEmbedding], list[list[tuple[str, float]]]]:
    tris: list[TriModalEmbedding] = []
    for start in range(0, len(texts), QUERY_BATCH):
        tris.extend(encoder.encode(texts[start : start + QUERY_BATCH]))
    qs = [fuse(t, index.config, index.dims, encoder.fingerprint) for t in tris]
    return tris, search_batch(index, qs, depth)


def run_search(
    cfg: PipelineConfig,
    query: str,
    k: int,
    client: LLMClient | None = None,
) -> QueryResult:
    index, encoder = open_index(cfg)
    try:
        docs = {d.doc_id: d for d in load_corpus(cfg)}
    except DatasetError:
        docs = {}
    reranker = make_reranker(cfg, client)
    depth = max(k, cfg.rerank.candidates) if reranker else k
    tris, hits = _retrieve(index, encoder, [query], depth)
    result = QueryResult(query, hits[0], titles={d: docs[d].title for d, _ in hits[0] if d in docs})
    if reranker:
        result.candidates = _candidates(index, tris[0], hits[0][: reranker.cap], docs)
        result.outcome = reranker(query, result.candidates)
    return result


@dataclass
class EvalResult:
    pre_run: RunResult
    pre_report: MetricReport
    run: RunResult | None = None
    report: MetricReport | None = None
    fallbacks: int = 0

    @property
    def final_report(self) -> MetricReport:
        return self.report or self.pre_report


def run_eval(cfg: PipelineConfig, client: LLMClient | None = None) -> EvalResult:
    """Batch loop over all queries; writes runs, reports and comparison tables."""
    corpus, queries, qrels = load_beir(cfg.dataset_dir, cfg.split)
    index, encoder = open_index(cfg)
    stored = index.fingerprints.get("config")
    if stored != cfg.index_hash():
        raise ConfigMismatchError(
            f"index {cfg.index_path} was built with config hash {str(stored)[:12]}, "
            f"current config hashes to {cfg.index_hash()[:12]}; rebuild with `trimodal index`"
        )
    if cfg.queries == "judged":
        queries = [q for q in queries if q.doc_id in qrels]
    if not queries:
        raise DatasetError("no queries to run", cfg.dataset_dir / "queries.jsonl")
    qids = [q.doc_id for q in queries]
    tris, hits = _retrieve(index, encoder, [q.text for q in queries], cfg.k)

    base_meta = {
        "dataset": cfg.name,
        "system": cfg.label,
        "config_hash": cfg.index_hash(),
        "encoder_fingerprint": encoder.fingerprint,
        "encoder_profile": index.encoder_profile,
        "depth": cfg.k,
        "queries": len(queries),
    }
    pre_run = RunResult(
        dict(zip(qids, hits)), {**base_meta, "rerank_mode": "none", "stage": "pre-rerank"}
    )
    result = EvalResult(pre_run, evaluate_run(pre_run, qrels, cfg.cutoffs))

    reranker = make_reranker(cfg, client)
    if reranker:
        docs = {d.doc_id: d for d in corpus}
        cand_lists = [_candidates(index, t, h[: reranker.cap], docs) for t, h in zip(tris, hits)]
        with ThreadPoolExecutor(max_workers=cfg.rerank.llm.max_in_flight) as pool:
            outcomes = list(pool.map(reranker, [q.text for q in queries], cand_lists))
        rankings = {
            qid: QueryResult(q.text, h, c, o).ranked
            for qid, q, h, c, o in zip(qids, queries, hits, cand_lists, outcomes)
        }
        result.fallbacks = sum(o.fallback for o in outcomes)
        result.run = RunResult(
            rankings,
            {
                **base_meta,
                "rerank_mode": cfg.rerank.mode,
                "stage": "post-rerank",
                "rerank_candidates": reranker.cap,
                "llm_model": cfg.rerank.llm.model,
                "llm_base_url": cfg.rerank.llm.base_url,
                "fallbacks": result.fallbacks,
                "fallback_queries": [q for q, o in zip(qids, outcomes) if o.fallback],
            },
        )
        result.report = evaluate_run(result.run, qrels, cfg.cutoffs)
    write_eval_outputs(cfg, result)
    return result


def format_tables(cfg: PipelineConfig, result: EvalResult) -> str:
    system, dataset = cfg.label, cfg.name
    final = result.final_report
    parts = [f"# {dataset} / {system}", "", final.format_text()]
    parts += ["## Rerank comparison (Recall@10, MRR@10, nDCG@10)", rerank_table({dataset: {system: final}})]
    if all(k in final.cutoffs for k in (1, 3, 5, 10)):
        parts += ["## nDCG at various cutoffs", ndcg_cutoff_table({dataset: {system: final}})]
    rows = {f"{system} (pre-rerank)": result.pre_report}
    if result.report is not None:
        rows[f"{system} (post-rerank, {cfg.rerank.mode})"] = result.report
    parts += ["## Pre-rerank vs post-rerank", pre_rerank_table(rows)]
    return "\n".join(parts)


def write_eval_outputs(cfg: PipelineConfig, result: EvalResult) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    tag = cfg.label.replace(" ", "_") or "trimodal"
    if result.run is None:
        write_run(result.pre_run, cfg.run_path(), tag)
        cfg.report_path().write_text(result.pre_report.to_json(), encoding="utf-8")
    else:
        write_run(result.pre_run, cfg.run_path(pre=True), tag + "_pre")
        cfg.report_path(pre=True).write_text(result.pre_report.to_json(), encoding="utf-8")
        write_run(result.run, cfg.run_path(), tag)
        cfg.report_path().write_text(result.report.to_json(), encoding="utf-8")  # type: ignore[union-attr]
    cfg.tables_path.write_text(format_tables(cfg, result), encoding="utf-8")


def load_report(path: str | Path) -> MetricReport:
    return MetricReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
