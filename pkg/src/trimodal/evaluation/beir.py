"""BEIR dataset layout: ``corpus.jsonl``, ``queries.jsonl``, ``qrels/<split>.tsv``."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import NamedTuple

from trimodal.documents import Document

log = logging.getLogger(__name__)

QrelSet = dict[str, dict[str, int]]

# corpus size, queries, qrels as reported for the evaluation datasets
BENCHMARK_SHAPES = {
    "scifact": (5183, 1109, 301),
    "fiqa": (57638, 6648, 649),
    "nfcorpus": (3633, 3237, 324),
}


class DatasetError(Exception):
    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class BeirDataset(NamedTuple):
    corpus: list[Document]
    queries: list[Document]
    qrels: QrelSet


def load_documents(path: Path, kind: str) -> list[Document]:
    if not path.is_file():
        raise DatasetError(f"missing {kind} file", path)
    docs: list[Document] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                doc_id = rec["_id"]
                text = rec["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"malformed {kind} line ({exc})", path, lineno) from exc
            if not isinstance(doc_id, (str, int)) or not isinstance(text, str):
                raise DatasetError(f"malformed {kind} line (bad _id/text types)", path, lineno)
            doc_id = str(doc_id)
            if doc_id in seen:
                raise DatasetError(f"duplicate _id {doc_id!r}", path, lineno)
            seen.add(doc_id)
            title = rec.get("title") or ""
            docs.append(Document(doc_id, text, str(title)))
    return docs


def qrels_path(root: str | Path, split: str = "test") -> Path:
    qdir = Path(root) / "qrels"
    path = qdir / f"{split}.tsv"
    if path.is_file():
        return path
    available = sorted(qdir.glob("*.tsv")) if qdir.is_dir() else []
    if len(available) == 1:
        log.info("qrels split %r not found, using %s", split, available[0].name)
        return available[0]
    raise DatasetError(f"missing qrels file (split {split!r})", path)


def load_qrels(path: str | Path) -> QrelSet:
    path = Path(path)
    if not path.is_file():
        raise DatasetError("missing qrels file", path)
    qrels: QrelSet = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                fields = line.split()
            if lineno == 1 and fields and fields[0] == "query-id":
                continue
            if len(fields) != 3:
                raise DatasetError("qrels line needs query-id, corpus-id, score", path, lineno)
            qid, did, score = (f.strip() for f in fields)
            try:
                grade = int(float(score))
            except ValueError as exc:
                raise DatasetError(f"non-numeric score {score!r}", path, lineno) from exc
            if grade < 0:
                raise DatasetError(f"negative relevance grade {grade}", path, lineno)
            judged = qrels.setdefault(qid, {})
            if did in judged:
                log.warning("%s:%d: duplicate judgment (%s, %s), last wins", path, lineno, qid, did)
            judged[did] = grade
    return qrels


def load_beir(root: str | Path, split: str = "test") -> BeirDataset:
    root = Path(root)
    if not root.is_dir():
        raise DatasetError("dataset directory does not exist", root)
    corpus = load_documents(root / "corpus.jsonl", "corpus")
    queries = load_documents(root / "queries.jsonl", "queries")
    qrels = load_qrels(qrels_path(root, split))
    doc_ids = {d.doc_id for d in corpus}
    query_ids = {q.doc_id for q in queries}
    unknown_q = sorted(q for q in qrels if q not in query_ids)
    unknown_d = sorted({d for judged in qrels.values() for d in judged if d not in doc_ids})
    if unknown_q:
        log.warning("qrels reference %d unknown query id(s), kept: %s", len(unknown_q), unknown_q[:5])
    if unknown_d:
        log.warning("qrels reference %d unknown doc id(s), kept: %s", len(unknown_d), unknown_d[:5])
    return BeirDataset(corpus, queries, qrels)
