import random

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tablenet.catgraph import (
    CategoryGraph, GraphConfigError, break_cycles, enforce_depth_consistency, normalize, renormalize,
)


def _is_acyclic(edges, nodes):
    parents = {n: set() for n in nodes}
    for c, p in edges:
        parents[c].add(p)
    indeg = {n: 0 for n in nodes}
    for c, p in edges:
        indeg[p] += 1
    queue = [n for n in nodes if indeg[n] == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for p in parents[n]:
            indeg[p] -= 1
            if indeg[p] == 0:
                queue.append(p)
    return seen == len(nodes)


def _longest_path_levels(dag, root):
    parents = {}
    for c, p in dag:
        parents.setdefault(c, set()).add(p)
    memo = {root: 0}

    def level(n, stack=()):
        if n in memo:
            return memo[n]
        vals = [level(p) for p in parents.get(n, ())]
        vals = [v for v in vals if v is not None]
        memo[n] = None if not vals else 1 + max(vals)
        return memo[n]

    return memo, level


# -- break_cycles ---------------------------------------------------------


def test_acyclic_input_unchanged():
    edges = [("a", "root"), ("b", "a"), ("c", "a")]
    out, removed = break_cycles(edges, "root")
    assert out == set(edges) and removed == []


def test_two_cycle_removes_y_childof_x():
    edges = [("Y", "root"), ("X", "Y"), ("Y", "X")]
    out, removed = break_cycles(edges, "root")
    assert [(e.child, e.parent) for e in removed] == [("Y", "X")]
    assert out == {("Y", "root"), ("X", "Y")}


def test_three_cycle_one_edge_removed():
    edges = [("A", "root"), ("B", "A"), ("C", "B"), ("A", "C")]
    out, removed = break_cycles(edges, "root")
    assert len(removed) == 1
    assert _is_acyclic(out, {"root", "A", "B", "C"})


def test_missing_root_is_config_error():
    with pytest.raises(GraphConfigError):
        break_cycles([("a", "b")], "root")


# -- depth consistency ----------------------------------------------------


def test_chain_levels():
    edges, levels, removed, unreachable = enforce_depth_consistency([("A", "root"), ("B", "A")], "root")
    assert levels == {"root": 0, "A": 1, "B": 2} and removed == [] and unreachable == []


def test_shallow_parent_dropped():
    dag = [("A", "root"), ("B", "A"), ("D", "B"), ("C", "A"), ("C", "D")]
    edges, levels, removed, _ = enforce_depth_consistency(dag, "root")
    assert ("C", "A") not in edges and ("C", "D") in edges
    assert levels["C"] == 4
    assert [(e.child, e.parent, e.reason) for e in removed] == [("C", "A", "depth")]


def test_diamond_keeps_both_parents():
    dag = [("A", "root"), ("B", "root"), ("C", "A"), ("C", "B")]
    edges, levels, removed, _ = enforce_depth_consistency(dag, "root")
    assert {("C", "A"), ("C", "B")} <= edges and levels["C"] == 2 and removed == []


def test_unreachable_reported():
    g = normalize([("A", "root"), ("X", "Y")], {"a": {"X"}}, "root")
    assert set(g.unreachable) == {"X", "Y"}
    assert "X" not in g.levels
    assert g.lca_categories(["a"]) == {"root"}


# -- article queries ------------------------------------------------------


@pytest.fixture
def small():
    edges = [("P", "root"), ("C1", "P"), ("C2", "P"), ("Q", "root"), ("D1", "Q"), ("D1", "P"), ("D2", "Q"), ("D2", "P")]
    assoc = {"x": {"C1"}, "y": {"C1"}, "z": {"C2"}, "w": {"C1", "C2"}, "r": {"P"}, "d1": {"D1"}, "d2": {"D2"}}
    return normalize(edges, assoc, "root")


def test_lca_examples(small):
    assert small.lca_categories(["x", "y"]) == {"C1"}
    assert small.lca_categories(["x", "z"]) == {"P"}
    assert small.lca_categories(["d1", "d2"]) == {"P", "Q"}
    assert small.lca_categories([]) == {"root"}


def test_parents_of_examples(small):
    assert small.parents_of("x") == {"C1", "P"}
    assert len(small.parents_of("w")) == 3
    assert small.parents_of("r") == {"P", "root"}
    with pytest.raises(KeyError):
        small.parents_of("nobody")


def test_json_round_trip(small, tmp_path):
    small.save(tmp_path / "g.json")
    again = CategoryGraph.load(tmp_path / "g.json")
    assert again.to_json() == small.to_json()


# -- random-graph properties ----------------------------------------------


def _check_normalized(g, nodes):
    edges = {(c, p) for c, ps in g.parent_edges.items() for p in ps}
    assert _is_acyclic(edges, set(nodes))
    assert g.levels[g.root_id] == 0
    for c, ps in g.parent_edges.items():
        if not ps or c not in g.levels:
            continue  # unreachable categories carry no level
        lv = {g.levels[p] for p in ps}
        assert len(lv) == 1, "retained parents must share one level"
        assert g.levels[c] == lv.pop() + 1


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 200), st.integers(0, 60))
def test_normalization_properties(seed, n_nodes, n_extra):
    rng = random.Random(seed)
    nodes, edges = oracles.random_graph(rng, n_nodes, n_extra)
    assoc = {f"a{i}": set(rng.sample(nodes, rng.randint(1, 2))) for i in range(12)}
    g = normalize(edges, assoc, "root", nodes=nodes)
    _check_normalized(g, nodes)

    # levels are longest root paths in the repaired DAG
    dag, _ = break_cycles(edges, "root", nodes)
    memo, level = _longest_path_levels(dag, "root")
    for n in g.levels:
        assert level(n) == g.levels[n]

    # idempotent
    again = renormalize(g)
    nonempty = lambda pe: {c: ps for c, ps in pe.items() if ps}
    assert nonempty(again.parent_edges) == nonempty(g.parent_edges)
    assert again.levels == g.levels
    assert [e for e in again.removed if e.reason != "unreachable-parent"] == []

    # LCA equals the brute-force ancestor intersection
    arts = sorted(assoc)
    for _ in range(10):
        subset = rng.sample(arts, rng.randint(1, 4))
        assert set(g.lca_categories(subset)) == oracles.lca(g, subset)
