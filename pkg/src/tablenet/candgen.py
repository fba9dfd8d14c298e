"""Article candidate pair generation.

Pair features (all cosine similarities unless noted):

    f1    tf-idf vectors of the abstracts
    f2    tf-idf weighted word-vector means of the abstracts
    f3    plain word-vector means of the abstracts
    f4    mean node vectors of the direct+parent category sets
    f5    Jaccard overlap of the direct+parent category sets
    f6    article node vectors
    f7    Jaccard overlap of KB types
    f8_l  mean best column-description similarity of the best table pair
    f8_d  mean position offset of those best column matches (distance)
    f9    mean best gamma-profile distance of the best table pair (distance)

Absent inputs give NaN rather than a fabricated value.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .catgraph import CategoryGraph
from .colsem import AttributeWeights, KbStore, column_profile, profile_distance, type_jaccard
from .corpus import Corpus, Table, tokenize
from .embed import EmbeddingStore, TfIdfIndex, avg_embedding, cosine, doc_embedding, sparse_cosine
from .forest import ForestParams, RandomForestModel, rf_predict_proba, train_rf

log = logging.getLogger(__name__)

FEATURES = ("f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8_l", "f8_d", "f9")
DISTANCE_FEATURES = frozenset({"f8_d", "f9"})
DEFAULT_CRITERIA = ("f1", "f2", "f4", "f5")


class ConfigurationError(ValueError):
    pass


@dataclass
class PairFeatures:
    a_i: str
    a_j: str
    values: np.ndarray  # aligned with FEATURES, NaN = absent
    label: Optional[int] = None

    @property
    def pair(self) -> tuple[str, str]:
        return self.a_i, self.a_j

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURES.index(name)])


@dataclass
class _TableView:
    desc: np.ndarray  # (columns, dim); zero rows where no token is known
    gammas: list  # gamma map per column, None without instance values


@dataclass
class _ArticleView:
    tfidf: dict
    doc: np.ndarray
    words: np.ndarray
    cats: frozenset
    cat_vec: Optional[np.ndarray]
    node: Optional[np.ndarray]
    tables: list


class FeatureContext:
    """Per-article precomputation shared by every pair featurization."""

    def __init__(self, corpus: Corpus, graph: CategoryGraph, store: EmbeddingStore, kb: KbStore,
                 index: Optional[TfIdfIndex] = None):
        self.corpus = corpus
        self.graph = graph
        self.store = store
        self.kb = kb
        self.index = index or TfIdfIndex.build(corpus, corpus.table_articles())
        self.weights = AttributeWeights(kb, graph)
        self._views: dict[str, _ArticleView] = {}

    def table_view(self, table: Table) -> _TableView:
        dim = self.store.word_vecs.dim
        desc = np.zeros((len(table.columns), dim))
        gammas = []
        for k, col in enumerate(table.columns):
            avg = avg_embedding(tokenize(col.description), self.store.word_vecs)
            if avg.vector is not None:
                desc[k] = avg.vector
            prof = column_profile(col, self.graph, self.weights)
            gammas.append(None if prof is None else prof.gamma)
        return _TableView(desc, gammas)

    def view(self, article_id: str) -> _ArticleView:
        hit = self._views.get(article_id)
        if hit is not None:
            return hit
        art = self.corpus[article_id]
        words = avg_embedding(tokenize(art.abstract), self.store.word_vecs).vector
        if words is None:
            words = np.zeros(self.store.word_vecs.dim)
        cats = self.graph.parents_of(article_id) if article_id in self.graph.article_assoc else frozenset()
        hit = _ArticleView(
            tfidf=self.index.vector(art),
            doc=doc_embedding(art, self.store, self.index),
            words=words,
            cats=cats,
            cat_vec=avg_embedding(sorted(cats), self.store.node_vecs).vector,
            node=self.store.node_vecs.get(article_id),
            tables=[self.table_view(t) for t in art.tables],
        )
        self._views[article_id] = hit
        return hit

    def warm(self, article_ids: Iterable[str]) -> None:
        for a in sorted(set(article_ids)):
            self.view(a)


def _cos_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    denom = np.outer(na, nb)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = np.where(denom > 0, (A @ B.T) / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(S, -1.0, 1.0)


def table_pair_scores(ti: _TableView, tj: _TableView) -> tuple[float, float, float]:
    """(f8_l, f8_d, f9) for one table pair; f9 is NaN without profiles."""
    S = _cos_matrix(ti.desc, tj.desc)
    best = np.argmax(S, axis=1)
    f8_l = float(S[np.arange(len(best)), best].mean())
    f8_d = float(np.abs(np.arange(len(best)) - best).mean())
    dists = []
    right = [g for g in tj.gammas if g is not None]
    if right:
        for g in ti.gammas:
            if g is not None:
                dists.append(min(profile_distance(g, h) for h in right))
    f9 = float(np.mean(dists)) if dists else math.nan
    return f8_l, f8_d, f9


def _jaccard(a: frozenset, b: frozenset) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def _opt_cos(u, v) -> float:
    if u is None or v is None:
        return math.nan
    return cosine(u, v)


def featurize_pair(a_i: str, a_j: str, ctx: FeatureContext, label=None) -> PairFeatures:
    if a_i == a_j:
        raise ValueError(f"self pair {a_i!r}")
    for a in (a_i, a_j):
        if not ctx.corpus[a].tables:
            raise ValueError(f"article {a!r} has no tables")
    vi, vj = ctx.view(a_i), ctx.view(a_j)
    best = None
    for ti in vi.tables:
        for tj in vj.tables:
            scores = table_pair_scores(ti, tj)
            if best is None or scores[0] > best[0]:
                best = scores
    values = np.array([
        sparse_cosine(vi.tfidf, vj.tfidf),
        cosine(vi.doc, vj.doc),
        cosine(vi.words, vj.words),
        _opt_cos(vi.cat_vec, vj.cat_vec),
        _jaccard(vi.cats, vj.cats),
        _opt_cos(vi.node, vj.node),
        type_jaccard(a_i, a_j, ctx.kb),
        best[0],
        best[1],
        best[2],
    ])
    return PairFeatures(a_i, a_j, values, label)


def featurize_pairs(pairs: Sequence[tuple], ctx: FeatureContext, labels=None, workers: int = 1) -> list[PairFeatures]:
    """Featurize in input order; output is independent of ``workers``."""
    ctx.warm(a for p in pairs for a in p)
    labels = labels or {}

    def one(p):
        return featurize_pair(p[0], p[1], ctx, labels.get(tuple(p)))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, pairs))
    return [one(p) for p in pairs]


def feature_matrix(features: Sequence[PairFeatures]) -> np.ndarray:
    if not features:
        return np.zeros((0, len(FEATURES)))
    return np.vstack([f.values for f in features])


# ---------------------------------------------------------------------------
# mean thresholds and conjunction filtering


@dataclass
class Thresholds:
    means: dict  # feature -> mean, None when unusable
    sample_size: int

    def to_json(self) -> dict:
        return {"means": self.means, "sample_size": self.sample_size}

    @classmethod
    def from_json(cls, obj) -> "Thresholds":
        return cls(dict(obj["means"]), int(obj["sample_size"]))


def compute_thresholds(features: Sequence[PairFeatures]) -> Thresholds:
    X = feature_matrix(features)
    means = {}
    for k, name in enumerate(FEATURES):
        col = X[:, k] if len(X) else np.zeros(0)
        col = col[np.isfinite(col)]
        means[name] = float(col.mean()) if len(col) else None
    return Thresholds(means, len(features))


def passes(f: PairFeatures, thresholds: Thresholds, criteria: Iterable[str]) -> bool:
    for name in criteria:
        mean = thresholds.means.get(name)
        value = f[name]
        if not math.isfinite(value):
            return False
        if name in DISTANCE_FEATURES:
            if value > mean:
                return False
        elif value < mean:
            return False
    return True


def filter_pairs(features: Sequence[PairFeatures], thresholds: Thresholds,
                 criteria: Iterable[str] = DEFAULT_CRITERIA) -> list[PairFeatures]:
    """Keep pairs meeting every criterion's mean threshold."""
    criteria = tuple(criteria)
    for name in criteria:
        if name not in FEATURES:
            raise ConfigurationError(f"unknown feature {name!r}")
        if thresholds.means.get(name) is None:
            raise ConfigurationError(f"threshold for {name} is unusable (feature absent everywhere)")
    return [f for f in features if passes(f, thresholds, criteria)]


# ---------------------------------------------------------------------------
# relevance classification


def default_forest_params(n_train: int, seed: int = 0) -> ForestParams:
    return ForestParams(num_trees=100, min_samples_split=max(2, int(round(0.05 * n_train))), seed=seed)


def train_relevance_model(features: Sequence[PairFeatures], params: ForestParams = None,
                          workers: int = 1) -> RandomForestModel:
    labeled = [f for f in features if f.label is not None]
    if not labeled:
        raise ValueError("no labeled pairs")
    X = feature_matrix(labeled)
    y = np.array([int(f.label) for f in labeled])
    params = params or default_forest_params(len(labeled))
    return train_rf(X, y, params, feature_names=FEATURES, n_classes=2, workers=workers)


def relevance_scores(model: RandomForestModel, features: Sequence[PairFeatures]) -> np.ndarray:
    if not features:
        return np.zeros(0)
    return rf_predict_proba(model, feature_matrix(features))[:, 1]


def classify_pairs(model: RandomForestModel, features: Sequence[PairFeatures], tau: float = 0.5) -> list[PairFeatures]:
    """Pairs whose relevance probability reaches ``tau``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    scores = relevance_scores(model, features)
    # tolerate rounding in the tree average so unanimous pairs survive tau=1
    return [f for f, s in zip(features, scores) if s >= tau - 1e-12]


# ---------------------------------------------------------------------------
# TSV feature files


def _fmt(x: float) -> str:
    return "nan" if not math.isfinite(x) else repr(float(x))


def write_features(path, features: Sequence[PairFeatures], header_comment: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["a_i", "a_j", *FEATURES, "label"])
        for f in features:
            writer.writerow([f.a_i, f.a_j, *(_fmt(v) for v in f.values), "" if f.label is None else int(f.label)])


def read_features(path) -> list[PairFeatures]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter="\t") if r and not r[0].startswith("#")]
    header = rows[0]
    idx = [header.index(n) for n in FEATURES]
    lab = header.index("label") if "label" in header else None
    for r in rows[1:]:
        values = np.array([float(r[i]) for i in idx])
        label = int(r[lab]) if lab is not None and lab < len(r) and r[lab] != "" else None
        out.append(PairFeatures(r[0], r[1], values, label))
    return out
