"""Ranking metrics and per-run aggregation.

Binary metrics (P, Recall, MRR, MAP) count a document as relevant when its
grade is at least 1; nDCG uses the graded, exponential-gain form.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Collection, Mapping, Sequence

from trimodal.evaluation.beir import QrelSet
from trimodal.evaluation.runs import RunResult

log = logging.getLogger(__name__)

CUTOFF_METRICS = ("P", "Recall", "MRR", "nDCG")
DEFAULT_CUTOFFS = (1, 3, 5, 10)


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError("cutoff k must be >= 1")


def precision_at_k(ranked: Sequence[str], relevant: Collection[str], k: int) -> float:
    """Hits in the top ``k`` over ``k``, even when fewer than ``k`` were returned."""
    _check_k(k)
    return sum(1 for d in ranked[:k] if d in relevant) / k


def recall_at_k(ranked: Sequence[str], relevant: Collection[str], k: int) -> float:
    _check_k(k)
    if not relevant:
        raise ValueError("recall is undefined without relevant documents")
    return sum(1 for d in ranked[:k] if d in relevant) / len(relevant)


def mrr_at_k(ranked: Sequence[str], relevant: Collection[str], k: int) -> float:
    _check_k(k)
    for rank, d in enumerate(ranked[:k], 1):
        if d in relevant:
            return 1.0 / rank
    return 0.0


def _dcg(gains: Sequence[int]) -> float:
    return sum((2.0**g - 1.0) / math.log2(i + 1) for i, g in enumerate(gains, 1))


def ndcg_at_k(ranked: Sequence[str], grades: Mapping[str, int], k: int) -> float:
    _check_k(k)
    ideal = _dcg(sorted((g for g in grades.values() if g > 0), reverse=True)[:k])
    if ideal <= 0.0:
        raise ValueError("nDCG is undefined without a positive grade")
    return _dcg([grades.get(d, 0) for d in ranked[:k]]) / ideal


def average_precision(ranked: Sequence[str], relevant: Collection[str]) -> float:
    """Over the whole retrieved list; unretrieved relevant docs contribute 0."""
    if not relevant:
        raise ValueError("average precision is undefined without relevant documents")
    hits = 0
    total = 0.0
    for rank, d in enumerate(ranked, 1):
        if d in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def mean_average_precision(run: RunResult, qrels: QrelSet) -> float:
    aps = []
    for qid, ranking in run.rankings.items():
        relevant = _relevant(qrels.get(qid, {}))
        if relevant:
            aps.append(average_precision([d for d, _ in ranking], relevant))
    if not aps:
        raise ValueError("no evaluable queries")
    return sum(aps) / len(aps)


def _relevant(grades: Mapping[str, int]) -> set[str]:
    return {d for d, g in grades.items() if g >= 1}


def metric_names(cutoffs: Sequence[int]) -> list[str]:
    return [f"{m}@{k}" for m in CUTOFF_METRICS for k in cutoffs] + ["MAP"]


@dataclass
class MetricReport:
    cutoffs: tuple[int, ...]
    aggregate: dict[str, float]
    per_query: dict[str, dict[str, float]]
    n_evaluated: int
    n_skipped_no_relevant: int = 0
    n_unjudged: int = 0
    n_missing_from_run: int = 0
    metadata: dict = field(default_factory=dict)

    def value(self, metric: str, k: int | None = None) -> float:
        return self.aggregate[metric if k is None else f"{metric}@{k}"]

    def to_dict(self) -> dict:
        return {
            "cutoffs": list(self.cutoffs),
            "aggregate": self.aggregate,
            "counts": {
                "evaluated": self.n_evaluated,
                "skipped_no_relevant": self.n_skipped_no_relevant,
                "unjudged": self.n_unjudged,
                "missing_from_run": self.n_missing_from_run,
            },
            "metadata": self.metadata,
            "per_query": self.per_query,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> MetricReport:
        counts = data.get("counts", {})
        return cls(
            cutoffs=tuple(data["cutoffs"]),
            aggregate=dict(data["aggregate"]),
            per_query={q: dict(v) for q, v in data.get("per_query", {}).items()},
            n_evaluated=counts.get("evaluated", 0),
            n_skipped_no_relevant=counts.get("skipped_no_relevant", 0),
            n_unjudged=counts.get("unjudged", 0),
            n_missing_from_run=counts.get("missing_from_run", 0),
            metadata=dict(data.get("metadata", {})),
        )

    def format_text(self, digits: int = 4) -> str:
        """Metric-by-cutoff grid, one row per metric family."""
        head = ["metric"] + [f"@{k}" for k in self.cutoffs]
        rows = [
            [m] + [f"{self.aggregate[f'{m}@{k}']:.{digits}f}" for k in self.cutoffs]
            for m in CUTOFF_METRICS
        ]
        widths = [max(len(r[i]) for r in [head, *rows]) for i in range(len(head))]
        fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))  # noqa: E731
        lines = [fmt(head), "-" * len(fmt(head))] + [fmt(r) for r in rows]
        lines.append(f"MAP {self.aggregate['MAP']:.{digits}f}")
        lines.append(
            f"queries evaluated {self.n_evaluated}, skipped (no relevant) "
            f"{self.n_skipped_no_relevant}, unjudged {self.n_unjudged}, "
            f"missing from run {self.n_missing_from_run}"
        )
        return "\n".join(lines) + "\n"


def score_query(
    ranked: Sequence[str], grades: Mapping[str, int], cutoffs: Sequence[int]
) -> dict[str, float]:
    relevant = _relevant(grades)
    out: dict[str, float] = {}
    for k in cutoffs:
        out[f"P@{k}"] = precision_at_k(ranked, relevant, k)
        out[f"Recall@{k}"] = recall_at_k(ranked, relevant, k)
        out[f"MRR@{k}"] = mrr_at_k(ranked, relevant, k)
        out[f"nDCG@{k}"] = ndcg_at_k(ranked, grades, k)
    out["MAP"] = average_precision(ranked, relevant)
    return out


def evaluate_run(
    run: RunResult, qrels: QrelSet, cutoffs: Sequence[int] = DEFAULT_CUTOFFS
) -> MetricReport:
    """Score every run query that has at least one relevant judgment.

    Aggregates are plain means over evaluated queries. Queries without
    judgments, without positive grades, or judged but absent from the run
    are skipped and counted.
    """
    cutoffs = tuple(sorted(set(cutoffs)))
    if not cutoffs:
        raise ValueError("need at least one cutoff")
    for k in cutoffs:
        _check_k(k)
    per_query: dict[str, dict[str, float]] = {}
    unjudged = no_relevant = 0
    for qid in sorted(run.rankings):
        grades = qrels.get(qid)
        if grades is None:
            unjudged += 1
            continue
        if not _relevant(grades):
            no_relevant += 1
            continue
        per_query[qid] = score_query([d for d, _ in run.rankings[qid]], grades, cutoffs)
    missing = sum(1 for q, g in qrels.items() if q not in run.rankings and _relevant(g))
    if unjudged:
        log.warning("%d run queries have no judgments; skipped", unjudged)
    if missing:
        log.warning("%d judged queries absent from the run; skipped", missing)
    if not per_query:
        raise ValueError("zero evaluable queries")
    names = metric_names(cutoffs)
    n = len(per_query)
    aggregate = {m: math.fsum(v[m] for v in per_query.values()) / n for m in names}
    return MetricReport(
        cutoffs=cutoffs,
        aggregate=aggregate,
        per_query=per_query,
        n_evaluated=n,
        n_skipped_no_relevant=no_relevant,
        n_unjudged=unjudged,
        n_missing_from_run=missing,
        metadata=dict(run.metadata),
    )
