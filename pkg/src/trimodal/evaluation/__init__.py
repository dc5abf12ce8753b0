from trimodal.evaluation.beir import BeirDataset, DatasetError, QrelSet, load_beir, load_qrels
from trimodal.evaluation.metrics import (
    DEFAULT_CUTOFFS,
    MetricReport,
    average_precision,
    evaluate_run,
    mean_average_precision,
    mrr_at_k,
    ndcg_at_k,
    precision_at_k,
    recall_at_k,
)
from trimodal.evaluation.runs import RunResult, format_run, read_run, write_run
from trimodal.evaluation.tables import ndcg_cutoff_table, pre_rerank_table, rerank_table

__all__ = [
    "BeirDataset",
    "DEFAULT_CUTOFFS",
    "DatasetError",
    "MetricReport",
    "QrelSet",
    "RunResult",
    "average_precision",
    "evaluate_run",
    "format_run",
    "load_beir",
    "load_qrels",
    "mean_average_precision",
    "mrr_at_k",
    "ndcg_at_k",
    "ndcg_cutoff_table",
    "precision_at_k",
    "pre_rerank_table",
    "read_run",
    "recall_at_k",
    "rerank_table",
    "write_run",
]
