"""Category hierarchy: cycle breaking, depth consistency, levels and LCA queries.

Edges are ``(child, parent)`` pairs ("child childOf parent"). Levels grow
downwards from the root (level 0).
"""
from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

log = logging.getLogger(__name__)


class GraphConfigError(ValueError):
    pass


@dataclass
class RemovedEdge:
    child: str
    parent: str
    reason: str  # cycle | depth | unreachable-parent


@dataclass
class CategoryGraph:
    root_id: str
    categories: dict[str, str]
    parent_edges: dict[str, frozenset]
    article_assoc: dict[str, frozenset]
    levels: dict[str, int]
    removed: list[RemovedEdge] = field(default_factory=list)
    unreachable: list[str] = field(default_factory=list)
    violations: list[RemovedEdge] = field(default_factory=list)

    def __post_init__(self):
        children = defaultdict(set)
        for child, parents in self.parent_edges.items():
            for p in parents:
                children[p].add(child)
        self.child_edges = {k: frozenset(v) for k, v in children.items()}
        self._ancestor_cache: dict[str, frozenset] = {}
        self._members_cache: dict[str, frozenset] = {}

    # -- structure -------------------------------------------------------

    def parents(self, category_id: str) -> frozenset:
        return self.parent_edges.get(category_id, frozenset())

    def children(self, category_id: str) -> frozenset:
        return self.child_edges.get(category_id, frozenset())

    def category_ancestors(self, category_id: str) -> frozenset:
        """The category itself plus every transitive parent."""
        hit = self._ancestor_cache.get(category_id)
        if hit is not None:
            return hit
        seen = {category_id}
        stack = [category_id]
        while stack:
            for p in self.parents(stack.pop()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        result = frozenset(seen)
        self._ancestor_cache[category_id] = result
        return result

    def descendants(self, category_id: str) -> frozenset:
        seen = {category_id}
        stack = [category_id]
        while stack:
            for c in self.children(stack.pop()):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return frozenset(seen)

    # -- article queries -------------------------------------------------

    def direct_categories(self, article_id: str) -> frozenset:
        """Leveled direct categories; ``{root}`` when every category was pruned."""
        if article_id not in self.article_assoc:
            raise KeyError(f"unknown article {article_id!r}")
        cats = frozenset(c for c in self.article_assoc[article_id] if c in self.levels)
        return cats or frozenset([self.root_id])

    def parents_of(self, article_id: str) -> frozenset:
        """Direct categories of an article plus their one-step parents."""
        direct = self.direct_categories(article_id)
        out = set(direct)
        for c in direct:
            out.update(p for p in self.parents(c) if p in self.levels)
        return frozenset(out)

    def article_ancestors(self, article_id: str) -> frozenset:
        out = set()
        for c in self.direct_categories(article_id):
            out |= self.category_ancestors(c)
        return frozenset(c for c in out if c in self.levels)

    def deepest_categories(self, article_id: str) -> frozenset:
        direct = self.direct_categories(article_id)
        depth = max(self.levels[c] for c in direct)
        return frozenset(c for c in direct if self.levels[c] == depth)

    def members(self, category_id: str) -> frozenset:
        """Articles whose ancestor set contains ``category_id``."""
        hit = self._members_cache.get(category_id)
        if hit is not None:
            return hit
        if category_id == self.root_id:
            result = frozenset(self.article_assoc)
        else:
            below = self.descendants(category_id)
            result = frozenset(
                a for a, cats in self.article_assoc.items()
                if any(c in below for c in self.direct_categories(a))
            )
        self._members_cache[category_id] = result
        return result

    def lca_categories(self, article_ids: Iterable[str]) -> frozenset:
        """Deepest common ancestors of a set of articles (ties kept)."""
        common: Optional[set] = None
        for aid in sorted(set(article_ids)):
            if not self.article_assoc.get(aid):
                log.warning("article %s has no category association; skipped for LCA", aid)
                continue
            anc = self.article_ancestors(aid)
            common = set(anc) if common is None else common & anc
            if not common:
                break
        if not common:
            return frozenset([self.root_id])
        depth = max(self.levels[c] for c in common)
        return frozenset(c for c in common if self.levels[c] == depth)

    # -- persistence -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "root": self.root_id,
            "categories": dict(sorted(self.categories.items())),
            "parents": {c: sorted(ps) for c, ps in sorted(self.parent_edges.items()) if ps},
            "articles": {a: sorted(cs) for a, cs in sorted(self.article_assoc.items())},
            "levels": dict(sorted(self.levels.items())),
            "removed": [[e.child, e.parent, e.reason] for e in self.removed],
            "unreachable": list(self.unreachable),
            "violations": [[e.child, e.parent, e.reason] for e in self.violations],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CategoryGraph":
        return cls(
            root_id=obj["root"],
            categories=dict(obj["categories"]),
            parent_edges={c: frozenset(ps) for c, ps in obj["parents"].items()},
            article_assoc={a: frozenset(cs) for a, cs in obj["articles"].items()},
            levels={c: int(v) for c, v in obj["levels"].items()},
            removed=[RemovedEdge(*e) for e in obj.get("removed", [])],
            unreachable=list(obj.get("unreachable", [])),
            violations=[RemovedEdge(*e) for e in obj.get("violations", [])],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=False)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CategoryGraph":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# normalization


def _children_map(edges) -> dict[str, list[str]]:
    children = defaultdict(set)
    for child, parent in edges:
        children[parent].add(child)
    return {p: sorted(cs) for p, cs in children.items()}


def break_cycles(raw_edges, root_id: str, nodes=None) -> tuple[set, list[RemovedEdge]]:
    """Remove DFS back-edges so that the childOf graph becomes a DAG.

    The traversal starts at the root and follows parent->child links with
    children visited in lexicographic order. Nodes the root cannot reach are
    swept afterwards, again in lexicographic order, so the result is acyclic
    whatever the input.
    """
    edges = set((str(c), str(p)) for c, p in raw_edges)
    known = set(nodes or ()) | {c for c, _ in edges} | {p for _, p in edges}
    if root_id not in known:
        raise GraphConfigError(f"root category {root_id!r} not present")
    children = _children_map(edges)
    removed = []
    state: dict[str, int] = {}  # 1 on stack, 2 finished

    def visit(start):
        state[start] = 1
        stack = [(start, iter(children.get(start, ())))]
        while stack:
            node, it = stack[-1]
            for child in it:
                s = state.get(child)
                if s is None:
                    state[child] = 1
                    stack.append((child, iter(children.get(child, ()))))
                    break
                if s == 1:
                    edges.discard((child, node))
                    removed.append(RemovedEdge(child, node, "cycle"))
            else:
                state[node] = 2
                stack.pop()

    visit(root_id)
    for node in sorted(known):
        if node not in state:
            visit(node)
    return edges, removed


def _reachable(root_id: str, edges) -> set:
    children = _children_map(edges)
    seen = {root_id}
    queue = deque([root_id])
    while queue:
        for c in children.get(queue.popleft(), ()):
            if c not in seen:
                seen.add(c)
                queue.append(c)
    return seen


def enforce_depth_consistency(dag_edges, root_id: str, nodes=None) -> tuple[set, dict, list[RemovedEdge], list[str]]:
    """Keep only the parents at the maximal parent level of every category.

    Categories are settled frontier by frontier from the root: a category is
    processed once all of its reachable parents have a level. Returns the
    retained edges, the levels, the removal log and the unreachable ids.
    """
    edges = set(dag_edges)
    known = set(nodes or ()) | {c for c, _ in edges} | {p for _, p in edges} | {root_id}
    reach = _reachable(root_id, edges)
    unreachable = sorted(known - reach)
    removed = []

    parents = defaultdict(set)
    for c, p in edges:
        parents[c].add(p)
    for c in sorted(reach):
        for p in sorted(parents[c] - reach):
            edges.discard((c, p))
            parents[c].discard(p)
            removed.append(RemovedEdge(c, p, "unreachable-parent"))

    children = _children_map(edges)
    pending = {c: len(parents[c]) for c in reach}
    levels = {root_id: 0}
    frontier = [root_id]
    while frontier:
        nxt = set()
        for node in frontier:
            for child in children.get(node, ()):
                pending[child] -= 1
                if pending[child] == 0:
                    nxt.add(child)
        for child in sorted(nxt):
            top = max(levels[p] for p in parents[child])
            for p in sorted(parents[child]):
                if levels[p] < top:
                    edges.discard((child, p))
                    removed.append(RemovedEdge(child, p, "depth"))
            parents[child] = {p for p in parents[child] if levels[p] == top}
            levels[child] = top + 1
        frontier = sorted(nxt)
    return edges, levels, removed, unreachable


def normalize(raw_edges, article_assoc, root_id: str, names=None, nodes=None) -> CategoryGraph:
    """Full repair pipeline: break cycles, then enforce depth consistency."""
    names = dict(names or {})
    all_nodes = set(nodes or ()) | set(names) | {root_id}
    dag, cycle_log = break_cycles(raw_edges, root_id, all_nodes)
    all_nodes |= {c for c, _ in dag} | {p for _, p in dag}
    edges, levels, depth_log, unreachable = enforce_depth_consistency(dag, root_id, all_nodes)
    parent_edges = defaultdict(set)
    for c, p in edges:
        parent_edges[c].add(p)
    graph = CategoryGraph(
        root_id=root_id,
        categories={c: names.get(c, c) for c in sorted(all_nodes)},
        parent_edges={c: frozenset(ps) for c, ps in parent_edges.items()},
        article_assoc={a: frozenset(cs) for a, cs in article_assoc.items()},
        levels=levels,
        removed=cycle_log + depth_log,
        unreachable=unreachable,
    )
    # a dropped shallower parent should stay reachable through the kept ones
    graph.violations = [
        e for e in depth_log
        if e.reason == "depth" and e.parent not in graph.category_ancestors(e.child)
    ]
    if unreachable:
        log.info("%d categories unreachable from root %s", len(unreachable), root_id)
    return graph


def renormalize(graph: CategoryGraph) -> CategoryGraph:
    edges = [(c, p) for c, ps in graph.parent_edges.items() for p in ps]
    return normalize(edges, graph.article_assoc, graph.root_id, graph.categories, graph.categories)


# ---------------------------------------------------------------------------
# TSV inputs


def read_edges(path) -> list[tuple[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [(row[0], row[1]) for row in csv.reader(fh, delimiter="\t") if row and not row[0].startswith("#")]


def read_associations(path) -> dict[str, frozenset]:
    assoc = defaultdict(set)
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if row and not row[0].startswith("#"):
                assoc[row[0]].add(row[1])
    return {a: frozenset(cs) for a, cs in assoc.items()}


def write_pairs_tsv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerows(rows)
