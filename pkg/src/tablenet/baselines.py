"""Candidate-generation baselines (G, C1, C2, PC, MW) and the schema-matching
alignment baseline built on maximum-weight bipartite matching."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .catgraph import CategoryGraph
from .colsem import column_lca
from .corpus import Corpus, Table


def pairs_greedy(source_articles: Iterable[str], corpus: Corpus) -> list[tuple[str, str]]:
    universe = corpus.table_articles()
    return [(a, b) for a in sorted(set(source_articles)) for b in universe if b != a]


def _category_pairs(source_articles, universe, key_of, source_key_of=None):
    source_key_of = source_key_of or key_of
    index = defaultdict(set)
    for b in universe:
        for k in key_of(b):
            index[k].add(b)
    out = []
    for a in sorted(set(source_articles)):
        hits = set()
        for k in source_key_of(a):
            hits |= index.get(k, set())
        hits.discard(a)
        out.extend((a, b) for b in sorted(hits))
    return out


def pairs_same_direct_category(source_articles, corpus: Corpus, graph: CategoryGraph):
    """C1: articles sharing at least one directly associated category."""
    return _category_pairs(source_articles, corpus.table_articles(), graph.direct_categories)


def pairs_deepest_category(source_articles, corpus: Corpus, graph: CategoryGraph):
    """C2: articles directly in one of the source's deepest categories."""
    return _category_pairs(
        source_articles, corpus.table_articles(), graph.direct_categories, graph.deepest_categories
    )


def pairs_same_parent_category(source_articles, corpus: Corpus, graph: CategoryGraph):
    """PC: direct-plus-parent category sets intersect."""
    return _category_pairs(source_articles, corpus.table_articles(), graph.parents_of)


# ---------------------------------------------------------------------------
# Milne-Witten relatedness


@dataclass
class AnchorGraph:
    in_links: dict
    total_articles: int

    @classmethod
    def from_corpus(cls, corpus: Corpus, total_articles: Optional[int] = None) -> "AnchorGraph":
        inv = defaultdict(set)
        for art in corpus:
            for target in art.anchor_out:
                inv[target].add(art.id)
        return cls({k: frozenset(v) for k, v in inv.items()}, total_articles or len(corpus))


def milne_witten(a: str, b: str, anchors: AnchorGraph) -> float:
    A = anchors.in_links.get(a, frozenset())
    B = anchors.in_links.get(b, frozenset())
    if not A or not B:
        return 0.0
    common = len(A & B)
    if common == 0:
        return 0.0
    big, small = max(len(A), len(B)), min(len(A), len(B))
    denom = math.log(anchors.total_articles) - math.log(small)
    if denom <= 0.0:
        return 1.0 if big == common else 0.0
    score = 1.0 - (math.log(big) - math.log(common)) / denom
    return min(1.0, max(0.0, score))


def pairs_milne_witten(source_articles, corpus: Corpus, anchors: AnchorGraph, tau: Optional[float] = None):
    """MW pairs scoring at least ``tau`` (default: the mean score over all
    source pairs). Returns the pairs and the threshold used."""
    candidates = pairs_greedy(source_articles, corpus)
    scores = np.array([milne_witten(a, b, anchors) for a, b in candidates])
    if tau is None:
        tau = float(scores.mean()) if len(scores) else 0.0
    return [p for p, s in zip(candidates, scores) if s >= tau], tau


# ---------------------------------------------------------------------------
# schema matching


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def string_similarity(a: str, b: str) -> float:
    a, b = a.lower(), b.lower()
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def _set_jaccard(a, b) -> float:
    a, b = a or frozenset(), b or frozenset()
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def max_weight_matching(W) -> float:
    """Exact maximum-weight bipartite matching value of a nonnegative matrix."""
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(W, maximize=True)
    return float(W[rows, cols].sum())


def schema_weights(t_i: Table, t_j: Table, graph: CategoryGraph, types_i=None, types_j=None) -> np.ndarray:
    types_i = types_i if types_i is not None else [column_lca(c, graph) for c in t_i.columns]
    types_j = types_j if types_j is not None else [column_lca(c, graph) for c in t_j.columns]
    W = np.zeros((len(t_i.columns), len(t_j.columns)))
    for k, ck in enumerate(t_i.columns):
        for l, cl in enumerate(t_j.columns):
            W[k, l] = 0.5 * string_similarity(ck.description, cl.description) + 0.5 * _set_jaccard(types_i[k], types_j[l])
    return W


def fusion_schema_score(t_i: Table, t_j: Table, graph: CategoryGraph, types_i=None, types_j=None) -> float:
    if not t_i.columns or not t_j.columns:
        raise ValueError("empty schema")
    W = schema_weights(t_i, t_j, graph, types_i, types_j)
    return max_weight_matching(W) / max(W.shape)


def fusion_classify(score: float, tau: float) -> bool:
    """True means related."""
    return score >= tau


def _binary_f1(pred, gold) -> float:
    pred = np.asarray(pred, bool)
    gold = np.asarray(gold, bool)
    tp = np.sum(pred & gold)
    fp = np.sum(pred & ~gold)
    fn = np.sum(~pred & gold)
    if tp == 0:
        return 0.0
    return float(2 * tp / (2 * tp + fp + fn))


def tune_fusion_threshold(scores, related) -> tuple[float, float]:
    """Threshold with the best F1 over the observed scores (lowest wins ties)."""
    scores = np.asarray(scores, float)
    best_tau, best_f1 = 0.0, -1.0
    for tau in np.unique(np.concatenate([scores, [0.0]])):
        f1 = _binary_f1(scores >= tau, related)
        if f1 > best_f1:
            best_tau, best_f1 = float(tau), f1
    return best_tau, best_f1
