"""Comparison tables in the layouts used to report tri-modal results.

* :func:`rerank_table` -- rows are datasets, one column group per system,
  each with Recall@10, MRR@10 and nDCG@10 (four decimals).
* :func:`ndcg_cutoff_table` -- rows are datasets, one column group per
  system with nDCG at k = 1, 3, 5, 10 (three decimals).
* :func:`pre_rerank_table` -- rows are systems, columns Recall@10, MRR@10
  and nDCG@10 (four decimals); used for the pre/post rerank comparison.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from trimodal.evaluation.metrics import MetricReport

HEADLINE_METRICS = (("Recall", 10), ("MRR", 10), ("nDCG", 10))
TABLE_CUTOFFS = (1, 3, 5, 10)


def _render(
    corner: str,
    groups: Sequence[tuple[str, Sequence[str]]],
    rows: Sequence[tuple[str, Sequence[Sequence[str]]]],
) -> str:
    label_w = max([len(corner)] + [len(r[0]) for r in rows])
    col_w: list[list[int]] = []
    for g, (_, cols) in enumerate(groups):
        col_w.append(
            [max([len(c)] + [len(r[1][g][i]) for r in rows]) for i, c in enumerate(cols)]
        )
    group_w = []
    for (label, _), widths in zip(groups, col_w):
        inner = sum(widths) + 2 * (len(widths) - 1)
        if len(label) > inner:
            widths[-1] += len(label) - inner
            inner = len(label)
        group_w.append(inner)

    top = " " * label_w + "".join(f" | {label.center(w)}" for (label, _), w in zip(groups, group_w))
    sub = corner.ljust(label_w) + "".join(
        " | " + "  ".join(c.rjust(w) for c, w in zip(cols, widths))
        for (_, cols), widths in zip(groups, col_w)
    )
    rule = "-" * len(sub)
    body = [
        name.ljust(label_w)
        + "".join(
            " | " + "  ".join(v.rjust(w) for v, w in zip(vals, widths))
            for vals, widths in zip(values, col_w)
        )
        for name, values in rows
    ]
    lines = ([top] if any(g[0] for g in groups) else []) + [sub, rule, *body]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def _cell(report: MetricReport | None, key: str, digits: int) -> str:
    if report is None or key not in report.aggregate:
        return "-"
    return f"{report.aggregate[key]:.{digits}f}"


def rerank_table(
    results: Mapping[str, Mapping[str, MetricReport]], systems: Sequence[str] | None = None
) -> str:
    """``results[dataset][system]`` -> Recall/MRR/nDCG@10 per system."""
    systems = list(systems or _systems(results))
    cols = [f"{m}@{k}" for m, k in HEADLINE_METRICS]
    rows = [
        (ds, [[_cell(by_sys.get(s), c, 4) for c in cols] for s in systems])
        for ds, by_sys in results.items()
    ]
    return _render("Dataset", [(s, cols) for s in systems], rows)


def ndcg_cutoff_table(
    results: Mapping[str, Mapping[str, MetricReport]],
    systems: Sequence[str] | None = None,
    cutoffs: Sequence[int] = TABLE_CUTOFFS,
) -> str:
    systems = list(systems or _systems(results))
    cols = [f"k={k}" for k in cutoffs]
    rows = [
        (ds, [[_cell(by_sys.get(s), f"nDCG@{k}", 3) for k in cutoffs] for s in systems])
        for ds, by_sys in results.items()
    ]
    return _render("Dataset", [(s, cols) for s in systems], rows)


def pre_rerank_table(results: Mapping[str, MetricReport]) -> str:
    cols = [f"{m}@{k}" for m, k in HEADLINE_METRICS]
    rows = [(name, [[_cell(rep, c, 4) for c in cols]]) for name, rep in results.items()]
    return _render("System", [("", cols)], rows)


def _systems(results: Mapping[str, Mapping[str, MetricReport]]) -> list[str]:
    seen: dict[str, None] = {}
    for by_sys in results.values():
        for s in by_sys:
            seen.setdefault(s)
    return list(seen)
