import json
import logging

import pytest

from trimodal.evaluation.beir import BENCHMARK_SHAPES, DatasetError, load_beir, load_qrels


def write_dataset(root, n_docs, n_queries, qrels_lines=None):
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "corpus.jsonl", "w") as fh:
        for i in range(n_docs):
            fh.write(json.dumps({"_id": f"D{i}", "title": "", "text": f"doc {i}"}) + "\n")
    with open(root / "queries.jsonl", "w") as fh:
        for i in range(n_queries):
            fh.write(json.dumps({"_id": f"Q{i}", "text": f"query {i}"}) + "\n")
    (root / "qrels").mkdir(exist_ok=True)
    lines = qrels_lines or [f"Q{i}\tD{i % n_docs}\t1" for i in range(n_queries)]
    (root / "qrels" / "test.tsv").write_text("query-id\tcorpus-id\tscore\n" + "\n".join(lines) + "\n")
    return root


@pytest.mark.parametrize("name", ["nfcorpus", "scifact"])
def test_benchmark_shaped_layout(tmp_path, name):
    n_docs, n_queries, _ = BENCHMARK_SHAPES[name]
    ds = load_beir(write_dataset(tmp_path / name, n_docs, n_queries))
    assert len(ds.corpus) == n_docs and len(ds.queries) == n_queries
    assert BENCHMARK_SHAPES["nfcorpus"][:2] == (3633, 3237)
    assert BENCHMARK_SHAPES["scifact"][0] == 5183


def test_qrels_grades(tmp_path, caplog):
    p = tmp_path / "q.tsv"
    p.write_text("query-id\tcorpus-id\tscore\nq1\td1\t0\nq1\td2\t2\nq1\td2\t1\n")
    with caplog.at_level(logging.WARNING):
        qrels = load_qrels(p)
    assert qrels == {"q1": {"d1": 0, "d2": 1}}
    assert sum("duplicate" in r.message for r in caplog.records) == 1


@pytest.mark.parametrize(
    "body, line", [("q1\td1\n", 1), ("q1\td1\t1\nq1\td2\tx\n", 2), ("q1\td1\t-1\n", 1)]
)
def test_qrels_malformed(tmp_path, body, line):
    p = tmp_path / "q.tsv"
    p.write_text(body)
    with pytest.raises(DatasetError) as info:
        load_qrels(p)
    assert info.value.line == line and f":{line}:" in str(info.value)


def test_missing_and_malformed_files(tmp_path):
    root = write_dataset(tmp_path / "ds", 3, 2)
    (root / "corpus.jsonl").unlink()
    with pytest.raises(DatasetError, match="corpus.jsonl"):
        load_beir(root)
    write_dataset(root, 3, 2)
    with open(root / "queries.jsonl", "a") as fh:
        fh.write("{not json\n")
    with pytest.raises(DatasetError, match=r"queries.jsonl:3:"):
        load_beir(root)


def test_unknown_ids_warn_but_stay(tmp_path, caplog):
    root = write_dataset(tmp_path / "ds", 2, 1, ["Q0\tD0\t1", "Q9\tD7\t1"])
    with caplog.at_level(logging.WARNING):
        ds = load_beir(root)
    assert "Q9" in ds.qrels and ds.qrels["Q9"] == {"D7": 1}
    assert any("unknown query" in r.message for r in caplog.records)
    assert any("unknown doc" in r.message for r in caplog.records)
