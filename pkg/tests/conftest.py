import pytest

from tablenet.catgraph import normalize
from tablenet.colsem import KbStore
from tablenet.corpus import MISSING, Article, Column, Instance, Primitive, Table, build_corpus
from tablenet.embed import EmbeddingStore


def _table(tid, aid, spec):
    rows = max(len(cells) for _, cells in spec)
    return Table(tid, aid, [Column(desc, list(cells)) for desc, cells in spec], rows)


def make_world():
    """Four table articles, six entity articles, a small hierarchy and KB."""
    people = [Instance(f"p{i}") for i in range(4)]
    places = [Instance("x0"), Instance("x1"), Instance("x0"), MISSING]
    nums = [Primitive("number", str(v)) for v in (1, 2, 3, 4)]
    arts = [
        Article("A", "Olympic athletes high jump record", "Medal winners and records in athletics.",
                frozenset({"Athletics"}), frozenset({"B", "p0"}), [
                    _table("A.t0", "A", [("Athlete", people), ("Country", places), ("Height", nums)]),
                    _table("A.t1", "A", [("Year", nums), ("Venue", places)]),
                ]),
        Article("B", "World championships", "Records from the world championships in athletics.",
                frozenset({"Athletics", "Sport"}), frozenset({"A"}), [
                    _table("B.t0", "B", [("Country", places[:2] + places[:2]), ("Jumper", people[::-1])]),
                ]),
        Article("C", "Film festival", "Awards for directors at the film festival.",
                frozenset({"Film"}), frozenset(), [
                    _table("C.t0", "C", [("Director", people[:2] + [Instance("x0"), MISSING]), ("Prize", nums)]),
                ]),
        Article("D", "Jazz album", "", frozenset({"Music"}), frozenset(), [
            _table("D.t0", "D", [("Track", nums), ("Length", nums)]),
        ]),
    ]
    arts += [Article(f"p{i}", f"Person {i}", "", frozenset({"People"})) for i in range(4)]
    arts += [Article(f"x{i}", f"Place {i}", "", frozenset({"Countries"})) for i in range(2)]
    edges = [("Sport", "root"), ("Athletics", "Sport"), ("Culture", "root"), ("Film", "Culture"),
             ("Music", "Culture"), ("Entities", "root"), ("People", "Entities"), ("Countries", "Entities")]
    assoc = {a.id: a.category_ids for a in arts}
    graph = normalize(edges, assoc, "root")
    triples = [("p0", "bornIn", "x0"), ("p1", "bornIn", "x0"), ("p2", "bornIn", "x1"), ("p3", "bornIn", "x1"),
               ("p0", "club", "k"), ("p1", "club", "k"), ("x0", "capital", "c0"), ("x1", "capital", "c1"),
               ("x0", "capital", "c1")]
    types = {"A": frozenset({"Event", "Sport"}), "B": frozenset({"Event"}), "C": frozenset({"Event", "Film"})}
    kb = KbStore(triples, types)
    return build_corpus(arts), graph, EmbeddingStore.hashed(16, seed=5), kb


@pytest.fixture
def world():
    return make_world()


# -- acceptance summary -----------------------------------------------------

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, name, ok, detail)."""
    def record(number, name, ok, detail=""):
        _ACCEPTANCE.append((number, name, bool(ok), detail))
        print(f"criterion {number} {name}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_ACCEPTANCE, key=lambda r: (r[0], r[1])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {name} {detail}".rstrip())
