"""Semantic column profiles: column types via LCA and attribute weights.

The weight of a KB attribute ``p`` for a category ``L`` is::

    gamma(p, L) = level(L) / maxlevel(p) * -ln(distinct objects of p in L / assignments of p in L)

where membership in ``L`` means ``L`` is among an article's ancestors and
``maxlevel(p)`` is the deepest category level holding an article that uses
``p``.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .catgraph import CategoryGraph
from .corpus import Column


@dataclass
class KbStore:
    triples: list[tuple[str, str, str]] = field(default_factory=list)
    type_assoc: dict[str, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        for s, p, _ in self.triples:
            if not p:
                raise ValueError(f"empty predicate for subject {s!r}")
        by_subject = defaultdict(list)
        for s, p, o in self.triples:
            by_subject[s].append((p, o))
        self.by_subject = dict(by_subject)

    def types(self, article_id: str) -> frozenset:
        return self.type_assoc.get(article_id, frozenset())

    def dangling_subjects(self, corpus) -> list[str]:
        return sorted({s for s, _, _ in self.triples if s not in corpus})

    @classmethod
    def load(cls, triples_path=None, types_path=None) -> "KbStore":
        triples = []
        if triples_path:
            with open(triples_path, encoding="utf-8", newline="") as fh:
                for row in csv.reader(fh, delimiter="\t"):
                    if row and not row[0].startswith("#"):
                        triples.append((row[0], row[1], row[2]))
        types = defaultdict(set)
        if types_path:
            with open(types_path, encoding="utf-8", newline="") as fh:
                for row in csv.reader(fh, delimiter="\t"):
                    if row and not row[0].startswith("#"):
                        types[row[0]].add(row[1])
        return cls(triples, {a: frozenset(t) for a, t in types.items()})


def type_jaccard(a_i: str, a_j: str, kb: KbStore) -> float:
    ti, tj = kb.types(a_i), kb.types(a_j)
    union = ti | tj
    if not union:
        return 0.0
    return len(ti & tj) / len(union)


def column_lca(column: Column, graph: CategoryGraph) -> Optional[frozenset]:
    """LCA categories of a column's instance values; None without instances."""
    ids = {i for i in column.instance_ids() if i in graph.article_assoc}
    if not ids:
        return None
    return graph.lca_categories(ids)


@dataclass
class GammaStats:
    weight: float
    distinct: int
    assignments: int
    flag: Optional[str] = None


class AttributeWeights:
    """Cached evaluation of attribute weights over one KB and one graph."""

    def __init__(self, kb: KbStore, graph: CategoryGraph):
        self.kb = kb
        self.graph = graph
        self._max_level = self._deepest_levels()
        self._cache: dict[tuple, GammaStats] = {}
        self._profiles: dict[str, dict] = {}

    def _deepest_levels(self) -> dict[str, int]:
        deepest = {}
        for subject, facts in self.kb.by_subject.items():
            if subject not in self.graph.article_assoc:
                continue
            depth = max(self.graph.levels[c] for c in self.graph.direct_categories(subject))
            for p, _ in facts:
                if depth > deepest.get(p, -1):
                    deepest[p] = depth
        return deepest

    def max_level(self, predicate: str) -> int:
        return self._max_level.get(predicate, 0)

    def _category_facts(self, category_id: str) -> dict[str, list[str]]:
        objects = defaultdict(list)
        for a in sorted(self.graph.members(category_id)):
            for p, o in self.kb.by_subject.get(a, ()):
                objects[p].append(o)
        return objects

    def stats(self, predicate: str, category_id: str) -> GammaStats:
        key = (predicate, category_id)
        hit = self._cache.get(key)
        if hit is None:
            objs = self._category_facts(category_id).get(predicate, [])
            hit = self._evaluate(predicate, category_id, objs)
            self._cache[key] = hit
        return hit

    def _evaluate(self, predicate, category_id, objs) -> GammaStats:
        if not objs:
            return GammaStats(0.0, 0, 0, "no-assignments")
        deepest = self.max_level(predicate)
        if deepest == 0:
            return GammaStats(0.0, len(set(objs)), len(objs), "zero-depth")
        level = self.graph.levels[category_id]
        ratio = len(set(objs)) / len(objs)
        return GammaStats(level / deepest * -math.log(ratio), len(set(objs)), len(objs))

    def weight(self, predicate: str, category_id: str) -> float:
        return self.stats(predicate, category_id).weight

    def category_profile(self, category_id: str) -> dict[str, float]:
        """gamma map over every attribute used inside the category."""
        hit = self._profiles.get(category_id)
        if hit is None:
            facts = self._category_facts(category_id)
            hit = {}
            for p in sorted(facts):
                st = self._evaluate(p, category_id, facts[p])
                self._cache[(p, category_id)] = st
                hit[p] = st.weight
            self._profiles[category_id] = hit
        return hit


def gamma_weight(predicate: str, category_id: str, kb: KbStore, graph: CategoryGraph) -> float:
    return AttributeWeights(kb, graph).weight(predicate, category_id)


@dataclass
class ColumnProfile:
    lca_set: frozenset
    gamma: dict[str, float]


def column_profile(column: Column, graph: CategoryGraph, weights: AttributeWeights) -> Optional[ColumnProfile]:
    """LCA set and gamma map of a column; tied LCA categories are averaged."""
    lca = column_lca(column, graph)
    if lca is None:
        return None
    maps = [weights.category_profile(c) for c in sorted(lca)]
    keys = sorted(set().union(*maps))
    gamma = {p: sum(m.get(p, 0.0) for m in maps) / len(maps) for p in keys}
    return ColumnProfile(lca, gamma)


def profile_distance(gamma_i: dict, gamma_j: dict) -> float:
    """Euclidean distance over the union of attribute keys (missing = 0)."""
    keys = set(gamma_i) | set(gamma_j)
    return math.sqrt(sum((gamma_i.get(k, 0.0) - gamma_j.get(k, 0.0)) ** 2 for k in keys))
