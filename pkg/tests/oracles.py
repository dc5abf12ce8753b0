"""Brute-force reference implementations used as test oracles.

Nothing here imports from ``trimodal``: each function recomputes its
quantity from the textbook definition with plain Python.
"""

from __future__ import annotations

import math


def ref_tokens(text):
    out, cur = [], []
    for ch in text:
        if ch.isalnum():
            cur.append(ch.lower())
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def ref_tfidf(corpus_texts, text, max_terms=1024):
    """Dict term -> weight recomputed from scratch."""
    docs = [set(ref_tokens(t)) for t in corpus_texts]
    n = len(docs)
    df = {}
    for d in docs:
        for t in d:
            df[t] = df.get(t, 0) + 1
    ranked = sorted(df, key=lambda t: (-df[t], t))[:max_terms]
    kept = set(ranked)
    counts = {}
    for tok in ref_tokens(text):
        if tok in kept:
            counts[tok] = counts.get(tok, 0) + 1
    out = {}
    for t, c in counts.items():
        idf = math.log(n / (1 + df[t]))
        if idf > 0:
            out[t] = c * idf
    return out


def ref_graph(entities, idf, vectors, dim, eps=1e-6):
    """Direct component-wise summation of the IDF-weighted entity mean."""
    num = [0.0] * dim
    den = 0.0
    for e in entities:
        w = idf.get(e, 0.0)
        if w <= 0:
            continue
        for i in range(dim):
            num[i] += w * vectors[e][i]
        den += w
    if den == 0:
        return [0.0] * dim
    return [x / (den + eps) for x in num]


# --- ranking metrics -------------------------------------------------------


def ref_precision(ranked, grades, k):
    return len([d for d in ranked[:k] if grades.get(d, 0) > 0]) / float(k)


def ref_recall(ranked, grades, k):
    rel = [d for d, g in grades.items() if g > 0]
    return len([d for d in ranked[:k] if d in rel]) / float(len(rel))


def ref_mrr(ranked, grades, k):
    i = 0
    while i < min(k, len(ranked)):
        if grades.get(ranked[i], 0) > 0:
            return 1.0 / (i + 1)
        i += 1
    return 0.0


def ref_ndcg(ranked, grades, k):
    dcg = 0.0
    for i in range(min(k, len(ranked))):
        rel = grades.get(ranked[i], 0)
        dcg += (math.pow(2, rel) - 1) / (math.log(i + 2) / math.log(2))
    ideal_gains = sorted(grades.values(), reverse=True)
    idcg = 0.0
    for i in range(min(k, len(ideal_gains))):
        idcg += (math.pow(2, ideal_gains[i]) - 1) / (math.log(i + 2) / math.log(2))
    return dcg / idcg


def ref_ap(ranked, grades):
    n_rel = sum(1 for g in grades.values() if g > 0)
    precisions = []
    for i in range(len(ranked)):
        if grades.get(ranked[i], 0) > 0:
            hits = sum(1 for d in ranked[: i + 1] if grades.get(d, 0) > 0)
            precisions.append(hits / (i + 1))
    return sum(precisions) / n_rel


def ref_scores(run, qrels, cutoffs):
    """Per-query metric dict keyed like the harness, for judged queries only."""
    out = {}
    for qid, ranked in run.items():
        grades = qrels.get(qid, {})
        if not any(g > 0 for g in grades.values()):
            continue
        row = {}
        for k in cutoffs:
            row["P@%d" % k] = ref_precision(ranked, grades, k)
            row["Recall@%d" % k] = ref_recall(ranked, grades, k)
            row["MRR@%d" % k] = ref_mrr(ranked, grades, k)
            row["nDCG@%d" % k] = ref_ndcg(ranked, grades, k)
        row["MAP"] = ref_ap(ranked, grades)
        out[qid] = row
    return out


def ref_topk(matrix_rows, doc_ids, q, k):
    """Full scan with Python sums; ties by doc_id ascending."""
    scored = []
    for doc_id, row in zip(doc_ids, matrix_rows):
        scored.append((-math.fsum(a * b for a, b in zip(row, q)), doc_id))
    scored.sort()
    return [(d, -s) for s, d in scored[:k]]




def random_case(rng):
    """A synthetic run and graded qrels: at most 50 docs and 20 queries.

    Some queries are left unjudged or judged all-zero so the skip paths
    are exercised too.
    """
    n_docs = rng.randint(1, 50)
    docs = ["doc%02d" % i for i in range(n_docs)]
    run, qrels = {}, {}
    for qi in range(rng.randint(1, 20)):
        qid = "q%02d" % qi
        run[qid] = rng.sample(docs, rng.randint(0, n_docs))
        roll = rng.random()
        if roll < 0.1:
            continue
        judged = rng.sample(docs, rng.randint(1, n_docs))
        if roll < 0.15:
            qrels[qid] = {d: 0 for d in judged}
        else:
            qrels[qid] = {d: rng.choice([0, 1, 1, 2, 3]) for d in judged}
    return run, qrels
