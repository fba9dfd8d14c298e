"""Independent brute-force evaluators used as test oracles."""
import itertools
import math
import random

import numpy as np


def random_graph(rng: random.Random, n_nodes: int, n_extra: int):
    nodes = ["root"] + [f"c{i:03d}" for i in range(n_nodes - 1)]
    edges = set()
    # a spanning tree keeps most nodes reachable; extra edges may form cycles
    for i, n in enumerate(nodes[1:], 1):
        if rng.random() < 0.95:
            edges.add((n, nodes[rng.randrange(i)]))
    for _ in range(n_extra):
        a, b = rng.sample(nodes, 2)
        edges.add((a, b))
    return nodes, sorted(edges)


def ancestors(graph, cat):
    """Fixpoint over the retained edge list, independent of the graph's own traversal."""
    out = {cat}
    changed = True
    while changed:
        changed = False
        for c, ps in graph.parent_edges.items():
            if c in out:
                for p in ps:
                    if p not in out:
                        out.add(p)
                        changed = True
    return out


def article_ancestors(graph, article):
    direct = {c for c in graph.article_assoc.get(article, ()) if c in graph.levels}
    if not direct:
        return {graph.root_id}
    out = set()
    for c in direct:
        out |= ancestors(graph, c)
    return {c for c in out if c in graph.levels}


def lca(graph, articles):
    common = None
    for a in articles:
        anc = article_ancestors(graph, a)
        common = anc if common is None else common & anc
    if not common:
        return {graph.root_id}
    top = max(graph.levels[c] for c in common)
    return {c for c in common if graph.levels[c] == top}


def gamma(predicate, category, triples, graph):
    """Attribute weight recomputed from scratch by enumerating every triple."""
    anc = {a: article_ancestors(graph, a) for a in graph.article_assoc}
    deepest = -1
    for s, p, _ in triples:
        if p == predicate and s in anc:
            deepest = max(deepest, max(graph.levels[c] for c in anc[s]))
    objs = [o for s, p, o in triples if p == predicate and s in anc and category in anc[s]]
    if not objs or deepest <= 0:
        return 0.0
    return graph.levels[category] / deepest * -math.log(len(set(objs)) / len(objs))


def best_matching(W) -> float:
    """Maximum-weight matching by enumerating every injective assignment."""
    W = np.asarray(W, dtype=float)
    n, m = W.shape
    if n == 0 or m == 0:
        return 0.0
    if n > m:
        W, n, m = W.T, m, n
    best = -np.inf
    for cols in itertools.permutations(range(m), n):
        best = max(best, sum(W[i, c] for i, c in enumerate(cols)))
    return float(best)


def levenshtein(a: str, b: str) -> int:
    """Plain recursive edit distance with memoization."""
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def model_gradient_errors(model, batch, rng, entries=12, eps=1e-5):
    """Max relative error between analytic and central-difference gradients, per block.

    Checks the largest-magnitude entries of every block plus random ones and a
    random direction over the whole block.
    """
    from tablenet.align.model import batch_loss, gradients

    _, grads, _ = gradients(model, batch)
    out = {}
    for name in sorted(model.params):
        P = model.params[name]
        g = grads[name]
        flat = np.abs(g).ravel()
        idx = set(np.argsort(-flat, kind="stable")[: entries // 2].tolist())
        idx |= set(rng.choice(flat.size, size=min(entries // 2, flat.size), replace=False).tolist())
        worst = 0.0
        for i in sorted(idx):
            pos = np.unravel_index(i, P.shape)
            old = P[pos]
            P[pos] = old + eps
            up = batch_loss(model, batch)
            P[pos] = old - eps
            dn = batch_loss(model, batch)
            P[pos] = old
            num = (up - dn) / (2 * eps)
            worst = max(worst, abs(num - g[pos]) / max(abs(num) + abs(g[pos]), 1e-6))
        d = rng.standard_normal(P.shape)
        old = P.copy()
        P += eps * d
        up = batch_loss(model, batch)
        P[...] = old - eps * d
        dn = batch_loss(model, batch)
        P[...] = old
        num = (up - dn) / (2 * eps)
        ana = float((g * d).sum())
        worst = max(worst, abs(num - ana) / max(abs(num) + abs(ana), 1e-6))
        out[name] = worst
    return out, grads
