import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tablenet.baselines import (
    AnchorGraph, fusion_classify, fusion_schema_score, levenshtein, max_weight_matching, milne_witten,
    pairs_deepest_category, pairs_greedy, pairs_milne_witten, pairs_same_direct_category,
    pairs_same_parent_category, schema_weights, string_similarity, tune_fusion_threshold,
)
from tablenet.catgraph import normalize
from tablenet.corpus import Article, Column, Instance, Primitive, Table, build_corpus


def _art(aid, cats, anchors=()):
    t = Table(f"{aid}.t", aid, [Column("c", [Primitive("text", "x")])], 1)
    return Article(aid, aid, "", frozenset(cats), frozenset(anchors), [t])


@pytest.fixture
def cat_world():
    edges = [("P", "root"), ("C1", "P"), ("C2", "P"), ("Q", "root"), ("Q1", "Q")]
    arts = [_art("a", {"C1"}), _art("b", {"C1"}), _art("c", {"C2"}), _art("d", {"Q1"}), _art("e", {"C1", "Q"}),
            Article("z", "z", "", frozenset({"Q1"}))]
    corpus = build_corpus(arts)
    return corpus, normalize(edges, {x.id: x.category_ids for x in arts}, "root")


def test_greedy(cat_world):
    corpus, _ = cat_world
    assert len(pairs_greedy(["a"], build_corpus([_art(x, {"P"}) for x in "abcd"]))) == 3
    pairs = pairs_greedy(["a", "c", "a"], corpus)
    assert len(pairs) == len(set(pairs)) == 2 * 4
    assert all(x != y for x, y in pairs)
    assert ("a", "z") not in pairs  # z carries no table


def test_category_baselines(cat_world):
    corpus, g = cat_world
    c1 = set(pairs_same_direct_category(["a"], corpus, g))
    c2 = set(pairs_deepest_category(["a"], corpus, g))
    pc = set(pairs_same_parent_category(["a"], corpus, g))
    assert ("a", "b") in c1 and ("a", "b") in c2 and ("a", "b") in pc
    assert ("a", "c") in pc and ("a", "c") not in c1 and ("a", "c") not in c2
    for src in "abcde":
        c1 = set(pairs_same_direct_category([src], corpus, g))
        c2 = set(pairs_deepest_category([src], corpus, g))
        pc = set(pairs_same_parent_category([src], corpus, g))
        assert c2 <= c1 <= pc


def test_milne_witten_examples():
    ag = AnchorGraph({"a": frozenset("wxyz"), "b": frozenset("wx"), "c": frozenset("wxyz"), "d": frozenset("q")}, 100)
    assert milne_witten("a", "c", ag) == 1.0
    assert milne_witten("a", "d", ag) == 0.0
    assert milne_witten("a", "b", ag) == pytest.approx(1 - (math.log(4) - math.log(2)) / (math.log(100) - math.log(2)))
    assert milne_witten("a", "b", ag) == pytest.approx(0.823, abs=5e-4)
    assert milne_witten("a", "nobody", ag) == 0.0


@settings(max_examples=60)
@given(st.lists(st.tuples(st.sampled_from("abcdefgh"), st.sampled_from("stuvw")), max_size=30))
def test_milne_witten_symmetric_and_matches_raw_lists(links):
    arts = [Article(s, s, "", anchor_out=frozenset(t for x, t in links if x == s)) for s in "abcdefgh"]
    arts += [Article(t, t, "") for t in "stuvw"]
    ag = AnchorGraph.from_corpus(build_corpus(arts))
    for x in "stuvw":
        for y in "stuvw":
            A = {s for s, t in links if t == x}
            B = {s for s, t in links if t == y}
            common = A & B
            if not common:
                want = 0.0
            else:
                num = math.log(max(len(A), len(B))) - math.log(len(common))
                den = math.log(13) - math.log(min(len(A), len(B)))
                want = min(1.0, max(0.0, 1 - num / den)) if den > 0 else float(max(len(A), len(B)) == len(common))
            assert milne_witten(x, y, ag) == pytest.approx(want, abs=1e-12)
            assert milne_witten(x, y, ag) == milne_witten(y, x, ag)


def test_mw_pairs_default_threshold_is_mean():
    arts = [_art("a", {"P"}, ["c"]), _art("b", {"P"}, ["c", "d"]), _art("c", {"P"}, ["a"]), _art("d", {"P"}, ["a"])]
    corpus = build_corpus(arts)
    ag = AnchorGraph.from_corpus(corpus)
    pairs, tau = pairs_milne_witten(["c"], corpus, ag)
    scores = [milne_witten("c", b, ag) for b in "abd"]
    assert tau == pytest.approx(np.mean(scores))
    assert pairs == [("c", b) for b, s in zip("abd", scores) if s >= tau]


@given(st.text("abc", max_size=7), st.text("abc", max_size=7))
def test_levenshtein_matches_recursive_oracle(a, b):
    assert levenshtein(a, b) == oracles.levenshtein(a, b)
    s = string_similarity(a, b)
    assert 0.0 <= s <= 1.0 and s == string_similarity(b, a)


def test_matching_random_4x5():
    rng = np.random.default_rng(0)
    W = rng.random((4, 5))
    assert max_weight_matching(W) == pytest.approx(oracles.best_matching(W), abs=1e-12)


def test_matching_brute_force_many():
    rng = np.random.default_rng(1)
    for _ in range(200):
        W = rng.random((rng.integers(1, 7), rng.integers(1, 7)))
        assert max_weight_matching(W) == pytest.approx(oracles.best_matching(W), abs=1e-12)


def _table(tid, cols):
    n = max(len(c) for _, c in cols)
    return Table(tid, "x", [Column(d, c) for d, c in cols], n)


def _schema_graph():
    edges = [("People", "root"), ("Places", "root")]
    assoc = {"p1": {"People"}, "p2": {"People"}, "x1": {"Places"}}
    return normalize(edges, assoc, "root")


def test_fusion_examples():
    g = _schema_graph()
    t = _table("t", [("Name", [Instance("p1"), Instance("p2")]), ("Born", [Instance("x1"), Instance("x1")])])
    u = _table("u", [("Name", [Instance("p2")]), ("Born", [Instance("x1")])])
    assert fusion_schema_score(t, u, g) == pytest.approx(1.0)
    v = _table("v", [("qqqq", [Primitive("text", "a")]), ("zzzz", [Primitive("text", "b")])])
    assert fusion_schema_score(t, v, g) == 0.0
    with pytest.raises(ValueError):
        fusion_schema_score(t, Table("e", "x", [], 0), g)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fusion_symmetric_and_permutation_invariant(seed):
    schema_world = _schema_graph()
    rng = random.Random(seed)
    pool = [Instance("p1"), Instance("p2"), Instance("x1"), Primitive("text", "a")]
    names = ["Name", "Player", "Born", "Place", "Year", "Team"]

    def table(tid):
        return _table(tid, [(rng.choice(names), [rng.choice(pool) for _ in range(2)]) for _ in range(rng.randint(1, 5))])

    t, u = table("t"), table("u")
    s = fusion_schema_score(t, u, schema_world)
    assert s == pytest.approx(fusion_schema_score(u, t, schema_world), abs=1e-12)
    cols = list(t.columns)
    rng.shuffle(cols)
    assert s == pytest.approx(fusion_schema_score(Table("t", "x", cols, t.row_count), u, schema_world), abs=1e-12)
    W = schema_weights(t, u, schema_world)
    assert s == pytest.approx(oracles.best_matching(W) / max(W.shape), abs=1e-12)


def test_fusion_classify():
    assert fusion_classify(0.0, 0.0) and fusion_classify(1.0, 1.0) and not fusion_classify(0.3, 0.5)


def _f1(pred, gold):
    tp = sum(p and g for p, g in zip(pred, gold))
    fp = sum(p and not g for p, g in zip(pred, gold))
    fn = sum(g and not p for p, g in zip(pred, gold))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def test_threshold_sweep_matches_grid():
    rng = np.random.default_rng(3)
    gold = rng.random(80) < 0.4
    scores = np.round(np.clip(rng.normal(0.4 + 0.3 * gold, 0.15), 0, 1), 3)
    tau, f1 = tune_fusion_threshold(scores, gold)
    grid = [_f1(scores >= t, gold) for t in np.round(np.arange(0, 1.0005, 0.001), 3)]
    assert f1 == pytest.approx(max(grid)) and f1 == pytest.approx(_f1(scores >= tau, gold))
