"""``trimodal`` command line: index, search, eval, tables.

Exit codes: 0 success (also when reranking fell back), 1 usage or config
error, 2 data error, 3 external service error after retries.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from trimodal.config import RERANK_MODES, ConfigError, load_config
from trimodal.encoders import EmbeddingError
from trimodal.evaluation.beir import DatasetError
from trimodal.evaluation.tables import ndcg_cutoff_table, pre_rerank_table, rerank_table
from trimodal.fusion import FingerprintMismatchError, IndexBuildError
from trimodal.pipeline import ConfigMismatchError, load_report, run_eval, run_index, run_search
from trimodal.rerank import LLMError
from trimodal.storage import IndexFileError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SERVICE = 0, 1, 2, 3

log = logging.getLogger("trimodal")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2, which means "data error" here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trimodal", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="build the hybrid index for the configured dataset")
    p.add_argument("-c", "--config", required=True)

    p = sub.add_parser("search", help="run one query against the index")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("-q", "--query", required=True)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--rerank", choices=RERANK_MODES)

    p = sub.add_parser("eval", help="run every query and score it against the qrels")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--rerank", choices=RERANK_MODES)
    p.add_argument("-k", type=int, help="retrieval depth")
    p.add_argument("--output-dir")

    p = sub.add_parser("tables", help="combine report JSON files into comparison tables")
    p.add_argument("reports", nargs="+")
    return parser


def _config(args: argparse.Namespace):
    cfg = load_config(args.config)
    changes = {"rerank_mode": getattr(args, "rerank", None)}
    if getattr(args, "output_dir", None):
        # results move, the index is still read from the configured location
        changes["index_dir"] = cfg.index_path.parent
        changes["output_dir"] = Path(args.output_dir)
    if getattr(args, "command", "") == "eval" and args.k is not None:
        changes["k"] = args.k
    cfg = cfg.with_overrides(**changes)
    cfg.validate()
    return cfg


def cmd_index(args: argparse.Namespace) -> int:
    cfg = _config(args)
    _, report = run_index(cfg)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_search(args: argparse.Namespace) -> int:
    if args.k < 1:
        raise ConfigError("-k must be >= 1")
    cfg = _config(args)
    res = run_search(cfg, args.query, args.k)
    if res.outcome is not None:
        out = res.outcome
        if out.weights is not None:
            w = out.weights
            note = " (static fallback)" if out.fallback else ""
            print(
                f"weights: semantic={w.semantic:.4f} lexical={w.lexical:.4f} "
                f"graph={w.graph:.4f}{note}"
            )
        elif out.fallback:
            print("listwise rerank unavailable; showing pre-rank order")
    hybrid = dict(res.hits)
    rerank_scores = dict(res.outcome.ranked) if res.outcome else {}
    print(f"{'rank':>4}  {'doc_id':<20} {'hybrid':>8} {'rerank':>8}  title")
    for rank, (doc_id, _) in enumerate(res.ranked[: args.k], 1):
        rr = f"{rerank_scores[doc_id]:8.4f}" if doc_id in rerank_scores else f"{'-':>8}"
        print(f"{rank:>4}  {doc_id:<20} {hybrid[doc_id]:8.4f} {rr}  {res.titles.get(doc_id, '')}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _config(args)
    result = run_eval(cfg)
    print(cfg.tables_path.read_text(encoding="utf-8"))
    if result.fallbacks:
        print(f"{result.fallbacks} rerank fallback(s); see {cfg.run_path()}.meta.json")
    return EXIT_OK


def cmd_tables(args: argparse.Namespace) -> int:
    by_dataset: dict[str, dict] = {}
    stages = {}
    for path in args.reports:
        rep = load_report(path)
        dataset = rep.metadata.get("dataset", "?")
        system = rep.metadata.get("system", path)
        stage = rep.metadata.get("stage", "")
        stages[f"{system} ({stage})" if stage else system] = rep
        slot = by_dataset.setdefault(dataset, {})
        if system not in slot or stage == "post-rerank":
            slot[system] = rep
    print("## Rerank comparison\n" + rerank_table(by_dataset))
    print("## nDCG at various cutoffs\n" + ndcg_cutoff_table(by_dataset))
    print("## Pre-rerank vs post-rerank\n" + pre_rerank_table(stages))
    return EXIT_OK


COMMANDS = {"index": cmd_index, "search": cmd_search, "eval": cmd_eval, "tables": cmd_tables}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except IndexBuildError as exc:
        log.error("%s", exc)
        service = isinstance(exc.cause, (EmbeddingError, LLMError))
        return EXIT_SERVICE if service else EXIT_DATA
    except (EmbeddingError, LLMError) as exc:
        log.error("%s", exc)
        return EXIT_SERVICE
    except (DatasetError, IndexFileError, ConfigMismatchError, FingerprintMismatchError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
