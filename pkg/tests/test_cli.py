import json
import subprocess
import sys

import pytest

from trimodal.cli import main
from trimodal.config import load_config
from trimodal.data import toy_dataset_dir
from trimodal.evaluation.runs import read_run
from trimodal.pipeline import run_index, run_search

TOY_DOCS = [json.loads(l) for l in (toy_dataset_dir() / "corpus.jsonl").read_text().splitlines()]


def cli(*args):
    """Run the CLI in a fresh interpreter so stderr logging is real."""
    proc = subprocess.run(
        [sys.executable, "-m", "trimodal.cli", *map(str, args)],
        capture_output=True, text=True, timeout=120,
    )
    return proc.returncode, proc.stdout, proc.stderr


def main_exit(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    return info.value.code


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main_exit([]) == 1
    assert main_exit(["search", "-q", "x"]) == 1
    assert main_exit(["eval", "-c", "x.json", "--rerank", "bogus"]) == 1
    assert main(["index", "-c", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"dataset": {"dir": "."}, "k": 3}')
    assert main(["eval", "-c", str(bad)]) == 1  # k below the largest cutoff


def test_missing_corpus_exit_2(toy_config, toy_copy):
    (toy_copy / "corpus.jsonl").unlink()
    code, _, err = cli("index", "-c", toy_config(dataset={"dir": str(toy_copy)}))
    assert code == 2 and "corpus.jsonl" in err


def test_eval_without_index_exit_2(toy_config):
    assert main(["eval", "-c", str(toy_config())]) == 2


def test_index_then_self_retrieval(toy_config, capsys):
    cfg = toy_config()
    assert main(["index", "-c", str(cfg)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["documents"] == 30 and report["vocabulary_size"] <= 1024
    for doc in TOY_DOCS[::7]:
        assert main(["search", "-c", str(cfg), "-q", doc["text"], "-k", "3"]) == 0
        rows = capsys.readouterr().out.splitlines()
        assert rows[1].split()[:2] == ["1", doc["_id"]]


def test_weights_mode_orders_by_graph_cosine(toy_config):
    cfg = load_config(toy_config(rerank={"llm": {"mock": {"weights": [0, 0, 1]}}}))
    run_index(cfg)
    res = run_search(cfg.with_overrides(rerank_mode="weights"), "Marie Curie in Paris", 10)
    assert not res.outcome.fallback
    by_graph = sorted(res.candidates, key=lambda c: (-c.cos_graph, c.doc_id))
    assert [d for d, _ in res.outcome.ranked] == [c.doc_id for c in by_graph]


def test_listwise_unreachable_llm_falls_back(toy_config):
    llm = {"base_url": "http://127.0.0.1:9", "retries": 1, "backoff": 0, "timeout": 2}
    cfg = toy_config(rerank={"llm": llm})
    assert cli("index", "-c", cfg)[0] == 0
    plain = cli("search", "-c", cfg, "-q", "Albert Einstein relativity")
    code, out, err = cli("search", "-c", cfg, "-q", "Albert Einstein relativity", "--rerank", "listwise")
    assert code == 0
    assert "rerank fallback" in err and "WARNING" in err
    order = lambda text: [l.split()[1] for l in text.splitlines() if l[:4].strip().isdigit()]
    assert order(out) == order(plain[1])


def test_malformed_llm_fallbacks_are_counted(toy_config):
    cfg = toy_config(rerank={"mode": "weights", "llm": {"mock": {"malformed": True}}})
    assert cli("index", "-c", cfg)[0] == 0
    code, out, err = cli("eval", "-c", cfg)
    assert code == 0
    meta = json.loads((cfg.parent / "out" / "run.tsv.meta.json").read_text())
    warnings = [l for l in err.splitlines() if "rerank fallback" in l]
    assert meta["fallbacks"] == 12 == len(warnings)
    assert len(meta["fallback_queries"]) == 12
    assert "12 rerank fallback(s)" in out


def test_eval_refuses_mismatched_index(toy_config, caplog):
    assert main(["index", "-c", str(toy_config())]) == 0
    changed = toy_config(fusion={"gamma": 0.5})
    assert main(["eval", "-c", str(changed)]) == 2
    assert "config hash" in caplog.text


def test_eval_outputs_and_tables_command(toy_config, capsys):
    cfg = toy_config(rerank={"mode": "listwise"})
    assert main(["index", "-c", str(cfg)]) == 0
    assert main(["eval", "-c", str(cfg), "-k", "20"]) == 0
    out_dir = cfg.parent / "out"
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == sorted([
        "build_report.json", "index.tmx", "report.json", "report.txt", "report_pre.json",
        "run.tsv", "run.tsv.meta.json", "run_pre.tsv", "run_pre.tsv.meta.json",
    ])
    run = read_run(out_dir / "run.tsv")
    assert all(len(r) == 20 for r in run.rankings.values())
    assert run.metadata["stage"] == "post-rerank"
    capsys.readouterr()
    assert main(["tables", str(out_dir / "report_pre.json"), str(out_dir / "report.json")]) == 0
    text = capsys.readouterr().out
    assert "Recall@10  MRR@10  nDCG@10" in text and "k=1" in text
    assert "test-64 (pre-rerank)" in text and "test-64 (post-rerank)" in text


def test_eval_output_dir_reads_configured_index(toy_config, tmp_path):
    cfg = toy_config()
    assert main(["index", "-c", str(cfg)]) == 0
    elsewhere = tmp_path / "elsewhere"
    assert main(["eval", "-c", str(cfg), "--rerank", "listwise", "--output-dir", str(elsewhere)]) == 0
    assert (elsewhere / "run.tsv").is_file() and not (elsewhere / "index.tmx").exists()
