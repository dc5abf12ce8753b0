"""Retrieval runs and their TREC-style TSV serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class RunResult:
    rankings: dict[str, list[tuple[str, float]]]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for qid, ranking in self.rankings.items():
            ids = [d for d, _ in ranking]
            if len(set(ids)) != len(ids):
                raise ValueError(f"query {qid!r}: duplicate doc_ids in ranking")
            scores = [s for _, s in ranking]
            if any(b > a for a, b in zip(scores, scores[1:])):
                raise ValueError(f"query {qid!r}: scores must be non-increasing")


def format_run(run: RunResult, tag: str) -> str:
    lines = []
    for qid in sorted(run.rankings):
        for rank, (doc_id, score) in enumerate(run.rankings[qid], 1):
            lines.append(f"{qid}\tQ0\t{doc_id}\t{rank}\t{score:.10f}\t{tag}")
    return "\n".join(lines) + ("\n" if lines else "")


def metadata_path(run_path: str | Path) -> Path:
    run_path = Path(run_path)
    return run_path.with_name(run_path.name + ".meta.json")


def write_run(run: RunResult, path: str | Path, tag: str) -> None:
    path = Path(path)
    path.write_text(format_run(run, tag), encoding="utf-8")
    metadata_path(path).write_text(
        json.dumps(run.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_run(path: str | Path) -> RunResult:
    path = Path(path)
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(fields)}")
            qid, _, doc_id, rank, score, _ = fields
            rows.setdefault(qid, []).append((int(rank), doc_id, float(score)))
    rankings = {q: [(d, s) for _, d, s in sorted(r)] for q, r in rows.items()}
    meta_file = metadata_path(path)
    meta = json.loads(meta_file.read_text(encoding="utf-8")) if meta_file.is_file() else {}
    return RunResult(rankings, meta)
