"""Seeded synthetic corpus with planted table relations.

Layout of the generated world::

    root
     +- dom<d>                         domains
     |   +- dom<d>.top<t>              topics (table articles live here ...)
     |       +- dom<d>.top<t>.s<k>     ... or in these subtopics
     +- entities
         +- ent.<concept>              one per instance-valued concept
             +- ent.<concept>.g<k>     entity articles; each family draws from its own group
     +- misc                           distractor concepts

Every topic owns a set of column concepts (each with a few interchangeable
header names) and a set of table templates over those concepts. A *family*
is a group of tables generated from one template:

* equivalence family: a base table and renamed variants (every header
  swapped for a synonym) filled with disjoint rows;
* subsumption family: a chain ``base > child > grandchild`` where each step
  projects away at least one column and keeps a fraction of the rows.

Tables of different families are unrelated. Distractor tables use concepts
that belong to no topic.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Optional

import numpy as np

from .catgraph import write_pairs_tsv
from .corpus import (
    MISSING, Article, Column, Corpus, Instance, Primitive, RelationLabel, Table, build_corpus, dumps_corpus, tokenize,
)
from .embed import VectorTable, save_vectors

DEFAULT_SYNONYMS = (
    ("Country", "Nation", "State", "Land", "Homeland"),
    ("Athlete", "Competitor", "Sportsperson", "Contestant", "Entrant"),
    ("Club", "Team", "Squad", "Side", "Outfit"),
    ("Coach", "Manager", "Trainer", "Mentor", "Instructor"),
    ("Film", "Movie", "Picture", "Feature", "Flick"),
    ("Director", "Filmmaker", "Helmer", "Auteur", "Moviemaker"),
    ("Artist", "Musician", "Performer", "Singer", "Act"),
    ("Album", "Record", "Release", "LP", "Disc"),
    ("City", "Town", "Municipality", "Locality", "Settlement"),
    ("Venue", "Stadium", "Arena", "Ground", "Location"),
    ("Party", "Faction", "Bloc", "Group", "Affiliation"),
    ("Candidate", "Nominee", "Contender", "Runner", "Aspirant"),
)

GENERIC_WORDS = 240
TOPIC_WORDS = 14
DOMAIN_WORDS = 10


@dataclass
class SynthSpec:
    num_articles: int = 200
    tables_per_article: int = 3
    num_domains: int = 4
    topics_per_domain: int = 3
    num_concepts: int = 36
    concepts_per_topic: int = 18
    rows_per_table: tuple = (8, 12)
    columns_per_table: tuple = (4, 7)
    selection_fraction: float = 0.5
    projection_rate: float = 0.5
    instance_fraction: float = 0.6
    distractor_fraction: float = 0.1
    subsumption_share: float = 0.65
    max_family_size: int = 8
    generated_synonyms: int = 5
    pool_size: int = 12
    noise_rate: float = 0.0
    dim: int = 50
    synonyms: tuple = DEFAULT_SYNONYMS
    seed: int = 0

    @classmethod
    def from_json(cls, obj) -> "SynthSpec":
        obj = dict(obj)
        for key in ("rows_per_table", "columns_per_table"):
            if key in obj:
                obj[key] = tuple(obj[key])
        if "synonyms" in obj:
            obj["synonyms"] = tuple(tuple(g) for g in obj["synonyms"])
        return cls(**obj)

    def to_json(self) -> dict:
        d = asdict(self)
        d["synonyms"] = [list(g) for g in self.synonyms]
        d["rows_per_table"] = list(self.rows_per_table)
        d["columns_per_table"] = list(self.columns_per_table)
        return d


@dataclass
class Concept:
    id: str
    names: tuple
    kind: str  # instance | number | date | text
    pool: Optional[str] = None  # entity category for instance concepts


@dataclass
class TableMeta:
    table_id: str
    article_id: str
    family: Optional[str]
    role: str  # base | equivalent | child | distractor
    concepts: list
    row_ids: list
    parent: Optional[str] = None


@dataclass
class GoldPair:
    t_i: str
    t_j: str
    a_i: str
    a_j: str
    label: RelationLabel


@dataclass
class SyntheticDataset:
    spec: SynthSpec
    corpus: Corpus
    root_id: str
    edges: list
    associations: dict
    category_names: dict
    triples: list
    types: dict
    word_vecs: VectorTable
    node_vecs: VectorTable
    gold: list  # GoldPair, related pairs only
    tables: dict  # table id -> TableMeta
    article_topic: dict = field(default_factory=dict)

    def label_of(self, t_i: str, t_j: str) -> RelationLabel:
        return self._gold_index().get((t_i, t_j), RelationLabel.NONE)

    def _gold_index(self) -> dict:
        if not hasattr(self, "_gi"):
            self._gi = {(g.t_i, g.t_j): g.label for g in self.gold}
        return self._gi

    def relevant_article_pairs(self) -> set:
        """Ordered article pairs with at least one related table pair (both orders)."""
        out = set()
        for g in self.gold:
            out.add((g.a_i, g.a_j))
            out.add((g.a_j, g.a_i))
        return out

    def write(self, directory) -> dict:
        """Write every input file of the pipeline; returns the path map."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": d / "corpus.jsonl",
            "edges": d / "edges.tsv",
            "associations": d / "associations.tsv",
            "categories": d / "categories.json",
            "triples": d / "triples.tsv",
            "types": d / "types.tsv",
            "word_embeddings": d / "words.vec",
            "node_embeddings": d / "nodes.vec",
            "gold": d / "gold.tsv",
            "tables_meta": d / "tables.json",
        }
        paths["corpus"].write_text(dumps_corpus(self.corpus), encoding="utf-8")
        write_pairs_tsv(paths["edges"], self.edges)
        write_pairs_tsv(paths["associations"], [(a, c) for a in sorted(self.associations)
                                                for c in sorted(self.associations[a])])
        paths["categories"].write_text(
            json.dumps({"root": self.root_id, "names": self.category_names}, indent=1, sort_keys=True) + "\n",
            encoding="utf-8")
        write_pairs_tsv(paths["triples"], self.triples)
        write_pairs_tsv(paths["types"], [(a, t) for a in sorted(self.types) for t in sorted(self.types[a])])
        save_vectors(self.word_vecs, paths["word_embeddings"])
        save_vectors(self.node_vecs, paths["node_embeddings"])
        write_gold(paths["gold"], self.gold)
        paths["tables_meta"].write_text(
            json.dumps({k: asdict(v) for k, v in sorted(self.tables.items())}, indent=1) + "\n", encoding="utf-8")
        return {k: str(v) for k, v in paths.items()}


def write_gold(path, gold) -> None:
    write_pairs_tsv(path, [("t_i", "t_j", "a_i", "a_j", "label")]
                    + [(g.t_i, g.t_j, g.a_i, g.a_j, g.label.tag) for g in gold])


def read_gold(path) -> list[GoldPair]:
    out = []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            t_i, t_j, a_i, a_j, label = line.rstrip("\n").split("\t")
            out.append(GoldPair(t_i, t_j, a_i, a_j, RelationLabel.parse(label)))
    return out


# ---------------------------------------------------------------------------
# generation


class _Words:
    """Unique pronounceable pseudo-words."""

    def __init__(self, rng, taken=()):
        self.rng = rng
        self.taken = {w.lower() for w in taken}

    def new(self, syllables=(2, 3)) -> str:
        cons = "bdfgklmnprstvz"
        vows = "aeiou"
        while True:
            n = self.rng.integers(syllables[0], syllables[1] + 1)
            w = "".join(cons[self.rng.integers(len(cons))] + vows[self.rng.integers(len(vows))] for _ in range(n))
            if w not in self.taken:
                self.taken.add(w)
                return w


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _template(rng, concepts, width):
    """Ordered concept list whose first column is instance-valued (the subject)."""
    subjects = [c for c in concepts if c.kind == "instance"]
    subject = subjects[rng.integers(len(subjects))]
    rest = [c for c in concepts if c.id != subject.id]
    w = int(rng.integers(width[0], width[1] + 1))
    return [subject.id] + [rest[i].id for i in rng.choice(len(rest), size=w - 1, replace=False)]


def _templates(rng, concepts, count, width, max_overlap=1):
    out = []
    attempts = 0
    while len(out) < count and attempts < 20000:
        attempts += 1
        pick = _template(rng, concepts, width)
        if all(len(set(pick) & set(t)) <= max_overlap for t in out):
            out.append(pick)
    # fall back to looser templates rather than fail
    while len(out) < count:
        pick = _template(rng, concepts, width)
        if all(set(pick) != set(t) for t in out):
            out.append(pick)
    return out


def generate_synthetic_corpus(spec: SynthSpec = SynthSpec()) -> SyntheticDataset:
    rng = np.random.default_rng(spec.seed)
    dim = spec.dim
    words = _Words(rng, [n for g in spec.synonyms for n in g])
    word_vecs = VectorTable(dim)
    node_vecs = VectorTable(dim)
    names = {"root": "Root", "entities": "Entities", "misc": "Miscellany"}
    edges = [("entities", "root"), ("misc", "root")]
    assoc: dict[str, set] = {}
    triples: list = []
    types: dict[str, set] = {}
    node_vecs.add("root", _unit(rng, dim))
    node_vecs.add("entities", _unit(rng, dim))
    node_vecs.add("misc", _unit(rng, dim))

    generic = [words.new() for _ in range(GENERIC_WORDS)]
    for w in generic:
        word_vecs.add(w, _unit(rng, dim))

    synonym_groups = list(spec.synonyms)

    def next_names():
        if synonym_groups:
            return tuple(synonym_groups.pop(0))
        return tuple(words.new().capitalize() for _ in range(spec.generated_synonyms))

    entity_articles: list[Article] = []

    def make_concept(cid, parent_cat, parent_vec):
        kind = "instance" if rng.random() < spec.instance_fraction else ("number", "date", "text")[rng.integers(3)]
        c = Concept(cid, next_names(), kind)
        base = _unit(rng, dim)
        for n in c.names:
            for tok in tokenize(n):
                if tok not in word_vecs:
                    word_vecs.add(tok, base + 0.15 * _unit(rng, dim))
        if kind == "instance":
            cat = f"ent.{cid}"
            names[cat] = f"{c.names[0]} entities"
            edges.append((cat, parent_cat))
            node_vecs.add(cat, 0.5 * parent_vec + _unit(rng, dim))
            c.pool = cat
        return c

    pools: dict = {}  # (concept id, group key) -> entity ids
    group_count: dict = {}

    def entity_pool(c: Concept, key, anchor_vec) -> list:
        """Entity articles of one sub-category of a concept, created on first use."""
        hit = pools.get((c.id, key))
        if hit is not None:
            return hit
        g = group_count.get(c.id, 0)
        group_count[c.id] = g + 1
        pool = f"{c.pool}.g{g:02d}"
        names[pool] = f"{c.names[0]} entities, group {g}"
        edges.append((pool, c.pool))
        pvec = node_vecs.get(c.pool) + 0.3 * anchor_vec + 0.5 * _unit(rng, dim)
        node_vecs.add(pool, pvec)
        # per-group vocabulary sizes make attribute weights differ between groups
        vocab = [[f"{c.id}.p{k}.v{m}" for m in range(int(rng.integers(1, 9)))] for k in range(3)]
        ids = []
        for e in range(spec.pool_size):
            eid = f"{pool}.e{e:02d}"
            entity_articles.append(Article(eid, f"{c.names[0]} {g}.{e}", "", frozenset([pool])))
            assoc[eid] = {pool}
            node_vecs.add(eid, pvec + 0.4 * _unit(rng, dim))
            types[eid] = {f"type.{c.id}"}
            for k, objs in enumerate(vocab):
                triples.append((eid, f"{c.id}.p{k}", objs[rng.integers(len(objs))]))
            ids.append(eid)
        pools[(c.id, key)] = ids
        return ids

    # column concepts are shared by all topics, like a common header vocabulary
    shared = [make_concept(f"c{k:02d}", "entities", node_vecs.get("entities")) for k in range(spec.num_concepts)]

    # -- taxonomy -----------------------------------------------------------
    topics = []  # (topic cat id, subtopic ids, topic vec, domain id, topic words, concepts)
    domain_words = {}
    for d in range(spec.num_domains):
        did = f"dom{d}"
        names[did] = f"Domain {d}"
        edges.append((did, "root"))
        dvec = _unit(rng, dim)
        node_vecs.add(did, dvec)
        domain_words[did] = [words.new() for _ in range(DOMAIN_WORDS)]
        for w in domain_words[did]:
            word_vecs.add(w, dvec + 0.8 * _unit(rng, dim))
        for t in range(spec.topics_per_domain):
            tid = f"{did}.top{t}"
            names[tid] = f"Topic {d}.{t}"
            edges.append((tid, did))
            tvec = 0.6 * dvec + _unit(rng, dim)
            node_vecs.add(tid, tvec)
            subs = []
            for s in range(2):
                sid = f"{tid}.s{s}"
                names[sid] = f"Subtopic {d}.{t}.{s}"
                edges.append((sid, tid))
                node_vecs.add(sid, tvec + 0.3 * _unit(rng, dim))
                subs.append(sid)
            # noise for the repair step: a cycle back to the domain and a level-skipping edge
            edges.append((did, subs[0]))
            edges.append((subs[1], did))
            twords = [words.new() for _ in range(TOPIC_WORDS)]
            for w in twords:
                word_vecs.add(w, tvec + 0.8 * _unit(rng, dim))
            pick = sorted(rng.choice(len(shared), size=min(spec.concepts_per_topic, len(shared)), replace=False))
            concepts = [shared[i] for i in pick]
            topics.append((tid, subs, tvec, did, twords, concepts))

    misc_concepts = [make_concept(f"m{k:02d}", "misc", node_vecs.get("misc")) for k in range(20)]

    # -- table articles: topic assignment ------------------------------------
    n_topics = len(topics)
    article_ids = [f"art{i:04d}" for i in range(spec.num_articles)]
    article_topic = {a: i % n_topics for i, a in enumerate(article_ids)}

    # table slots per topic; a slot is (article id, slot index)
    slots_by_topic = {i: [] for i in range(n_topics)}
    for a in article_ids:
        for s in range(spec.tables_per_article):
            slots_by_topic[article_topic[a]].append((a, s))

    metas: dict[str, TableMeta] = {}
    tables_of: dict[str, list] = {a: [None] * spec.tables_per_article for a in article_ids}
    gold: list[GoldPair] = []
    row_counter = [0]

    def cell_for(concept: Concept, taken: set, group, anchor_vec):
        if concept.kind == "instance":
            pool_ids = entity_pool(concept, group, anchor_vec)
            free = [e for e in pool_ids if e not in taken] or pool_ids
            eid = free[rng.integers(len(free))]
            taken.add(eid)
            return Instance(eid)
        if concept.kind == "number":
            return Primitive("number", str(int(rng.integers(1, 1000))))
        if concept.kind == "date":
            return Primitive("date", f"{int(rng.integers(1950, 2020))}-{int(rng.integers(1, 13)):02d}")
        return Primitive("text", generic[rng.integers(len(generic))])

    def make_rows(concepts, n, taken_by_concept, group, anchor_vec):
        rows = []
        for _ in range(n):
            row_counter[0] += 1
            rows.append((row_counter[0], {c.id: cell_for(c, taken_by_concept.setdefault(c.id, set()),
                                                         group(c.id), anchor_vec)
                                          for c in concepts}))
        return rows

    def noisy(cell):
        if spec.noise_rate > 0 and rng.random() < spec.noise_rate:
            return MISSING
        return cell

    def build_table(tid, aid, concepts, name_idx, rows):
        cols = [Column(c.names[name_idx % len(c.names)], [noisy(r[1][c.id]) for r in rows]) for c in concepts]
        return Table(tid, aid, cols, len(rows))

    def n_rows():
        return int(rng.integers(spec.rows_per_table[0], spec.rows_per_table[1] + 1))

    table_seq = [0]

    def new_table_id():
        table_seq[0] += 1
        return f"tab{table_seq[0]:05d}"

    for ti, (tid, subs, tvec, did, twords, concepts) in enumerate(topics):
        slots = slots_by_topic[ti]
        order = rng.permutation(len(slots))
        slots = [slots[i] for i in order]
        n_distract = int(round(spec.distractor_fraction * len(slots)))
        distract_slots, family_slots = slots[:n_distract], slots[n_distract:]

        # carve family slots into families of 2..max_family_size with distinct articles
        families = []
        pending = list(family_slots)
        while pending:
            size = int(rng.integers(2, spec.max_family_size + 1))
            fam, rest = [], []
            used_articles = set()
            for s in pending:
                if len(fam) < size and s[0] not in used_articles:
                    fam.append(s)
                    used_articles.add(s[0])
                else:
                    rest.append(s)
            if len(fam) < 2:
                distract_slots.extend(fam)
                pending = rest
                continue
            families.append(fam)
            pending = rest

        templates = _templates(rng, concepts, len(families), spec.columns_per_table)
        by_id = {c.id: c for c in concepts}
        for f_idx, (fam, template) in enumerate(zip(families, templates)):
            fam_id = f"{tid}.f{f_idx:02d}"
            tcon = [by_id[c] for c in template]
            kind = "subsumption" if rng.random() < spec.subsumption_share else "equivalence"
            if kind == "subsumption" and len(template) < 3:
                kind = "equivalence"
            taken: dict = {}
            base_rows = make_rows(tcon, n_rows(), taken, lambda _c: fam_id, tvec)
            members = []  # (table id, article, concepts, row tuples)
            a0, s0 = fam[0]
            base_id = new_table_id()
            tables_of[a0][s0] = build_table(base_id, a0, tcon, 0, base_rows)
            metas[base_id] = TableMeta(base_id, a0, fam_id, "base", [c.id for c in tcon],
                                       [r[0] for r in base_rows])
            members.append((base_id, a0, tcon, base_rows))
            if kind == "equivalence":
                # every member needs its own header name for each column
                limit = min(len(c.names) for c in tcon)
                distract_slots.extend(fam[limit:])
                for m, (a, s) in enumerate(fam[1:limit], 1):
                    rows = make_rows(tcon, n_rows(), taken, lambda _c: fam_id, tvec)
                    t_id = new_table_id()
                    tables_of[a][s] = build_table(t_id, a, tcon, m, rows)
                    metas[t_id] = TableMeta(t_id, a, fam_id, "equivalent", [c.id for c in tcon],
                                            [r[0] for r in rows], parent=base_id)
                    members.append((t_id, a, tcon, rows))
                # equivalence is symmetric: record both orders
                for x, y in combinations(members, 2):
                    gold.append(GoldPair(x[0], y[0], x[1], y[1], RelationLabel.EQUIVALENT))
                    gold.append(GoldPair(y[0], x[0], y[1], x[1], RelationLabel.EQUIVALENT))
            else:
                prev_id, prev_con, prev_rows = base_id, tcon, base_rows
                for a, s in fam[1:]:
                    # a step is a strict row selection, plus a column projection with projection_rate
                    project = len(prev_con) >= 3 and rng.random() < spec.projection_rate
                    if len(prev_rows) < 2 and not project:
                        break
                    con = prev_con
                    if project:
                        drop = int(rng.integers(1, len(prev_con)))  # the subject column stays
                        con = [c for i, c in enumerate(prev_con) if i != drop]
                    keep_rows = int(round(spec.selection_fraction * len(prev_rows)))
                    keep_rows = max(1, min(len(prev_rows) - 1, keep_rows)) if len(prev_rows) > 1 else 1
                    rsel = sorted(rng.choice(len(prev_rows), size=keep_rows, replace=False))
                    rows = [prev_rows[i] for i in rsel]
                    t_id = new_table_id()
                    tables_of[a][s] = build_table(t_id, a, con, 0, rows)
                    metas[t_id] = TableMeta(t_id, a, fam_id, "child", [c.id for c in con],
                                            [r[0] for r in rows], parent=prev_id)
                    members.append((t_id, a, con, rows))
                    prev_id, prev_con, prev_rows = t_id, con, rows
                # every ancestor subsumes every descendant in the chain
                for x, y in combinations(members, 2):
                    gold.append(GoldPair(x[0], y[0], x[1], y[1], RelationLabel.SUBPARTOF))
                # slots left over by a short chain become distractors
                for a, s in fam[len(members):]:
                    distract_slots.append((a, s))

        for a, s in distract_slots:
            w = int(rng.integers(spec.columns_per_table[0], spec.columns_per_table[1] + 1))
            con = [misc_concepts[i] for i in rng.choice(len(misc_concepts), size=w, replace=False)]
            groups = {c.id: f"d{rng.integers(4)}" for c in con}
            rows = make_rows(con, n_rows(), {}, groups.get, node_vecs.get("misc"))
            t_id = new_table_id()
            tables_of[a][s] = build_table(t_id, a, con, int(rng.integers(3)), rows)
            metas[t_id] = TableMeta(t_id, a, None, "distractor", [c.id for c in con], [r[0] for r in rows])

    # -- article records -----------------------------------------------------
    articles = list(entity_articles)
    by_topic = {i: [a for a in article_ids if article_topic[a] == i] for i in range(n_topics)}
    for a in article_ids:
        tid, subs, tvec, did, twords, _ = topics[article_topic[a]]
        direct = [tid, subs[0], subs[1]][rng.integers(3)]
        cats = {direct}
        if rng.random() < 0.2:
            other = topics[rng.integers(n_topics)]
            cats.add(other[0])
        assoc[a] = cats
        toks = []
        for _ in range(int(rng.integers(18, 30))):
            u = rng.random()
            if u < 0.4:
                toks.append(twords[rng.integers(len(twords))])
            elif u < 0.55:
                toks.append(domain_words[did][rng.integers(DOMAIN_WORDS)])
            else:
                toks.append(generic[rng.integers(len(generic))])
        abstract = " ".join(toks).capitalize() + "."
        mates = [b for b in by_topic[article_topic[a]] if b != a]
        anchors = {mates[i] for i in rng.choice(len(mates), size=min(3, len(mates)), replace=False)}
        anchors.add(article_ids[rng.integers(len(article_ids))])
        anchors.discard(a)
        tabs = tables_of[a]
        for t in tabs:
            for col in t.columns:
                anchors.update(col.instance_ids()[:2])
        articles.append(Article(a, f"Article {a}", abstract, frozenset(cats), frozenset(anchors), list(tabs)))
        node_vecs.add(a, tvec + 0.5 * _unit(rng, dim))
        types[a] = {"type.thing", f"type.{did}"} | ({f"type.{tid}"} if rng.random() < 0.7 else set())

    corpus = build_corpus(articles)
    edges = sorted(set(edges))
    return SyntheticDataset(
        spec=spec,
        corpus=corpus,
        root_id="root",
        edges=edges,
        associations={a: frozenset(c) for a, c in sorted(assoc.items())},
        category_names=dict(sorted(names.items())),
        triples=sorted(triples),
        types={a: frozenset(t) for a, t in sorted(types.items())},
        word_vecs=word_vecs,
        node_vecs=node_vecs,
        gold=gold,
        tables=metas,
        article_topic=article_topic,
    )
