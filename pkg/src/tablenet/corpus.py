"""Article/table data model and the JSONL corpus interchange format.

Each line of a corpus file is one article::

    {"id": ..., "title": ..., "abstract": ..., "categories": [...],
     "anchors": [...], "tables": [{"id": ..., "rows": N,
        "columns": [{"desc": ..., "cells": [{"t": "i", "v": "<article-id>"},
                                            {"t": "p", "k": "number", "v": "3"},
                                            {"t": "m"}]}]}]}
"""
from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union


class CorpusError(ValueError):
    """Malformed corpus input."""


class IntegrityError(CorpusError):
    """Structurally valid input that violates a corpus invariant."""


class RelationLabel(enum.IntEnum):
    # integer values fix the class order used for argmax tie-breaking
    EQUIVALENT = 0
    SUBPARTOF = 1
    NONE = 2

    @property
    def tag(self) -> str:
        return _LABEL_TAGS[self]

    @classmethod
    def parse(cls, text: str) -> "RelationLabel":
        try:
            return _TAG_LABELS[text.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown relation label {text!r}") from None


_LABEL_TAGS = {
    RelationLabel.EQUIVALENT: "equivalent",
    RelationLabel.SUBPARTOF: "subPartOf",
    RelationLabel.NONE: "none",
}
_TAG_LABELS = {v.lower(): k for k, v in _LABEL_TAGS.items()}


@dataclass(frozen=True)
class Instance:
    article_id: str


@dataclass(frozen=True)
class Primitive:
    kind: str  # text | number | date
    raw: str


@dataclass(frozen=True)
class Missing:
    pass


MISSING = Missing()
CellValue = Union[Instance, Primitive, Missing]
PRIMITIVE_KINDS = ("text", "number", "date")


@dataclass
class Column:
    description: str
    cells: list

    def instance_ids(self) -> list[str]:
        return [c.article_id for c in self.cells if isinstance(c, Instance)]


@dataclass
class Table:
    id: str
    article_id: str
    columns: list[Column]
    row_count: int


@dataclass
class Article:
    id: str
    title: str
    abstract: str
    category_ids: frozenset = frozenset()
    anchor_out: frozenset = frozenset()
    tables: list[Table] = field(default_factory=list)


@dataclass
class Corpus:
    articles: dict[str, Article] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.articles)

    def __iter__(self) -> Iterator[Article]:
        return iter(self.articles.values())

    def __getitem__(self, article_id: str) -> Article:
        return self.articles[article_id]

    def __contains__(self, article_id: str) -> bool:
        return article_id in self.articles

    def table_articles(self) -> list[str]:
        """Ids of articles carrying at least one table, sorted."""
        return sorted(a.id for a in self.articles.values() if a.tables)

    def tables(self) -> dict[str, Table]:
        return {t.id: t for a in self.articles.values() for t in a.tables}

    def dangling_ids(self) -> list[str]:
        missing = set()
        for article in self.articles.values():
            for table in article.tables:
                for col in table.columns:
                    missing.update(i for i in col.instance_ids() if i not in self.articles)
        return sorted(missing)


_TOKEN_SPLIT = re.compile(r"[\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters.

    >>> tokenize("U.S.A. 2017")
    ['u', 's', 'a', '2017']
    """
    if not text:
        return []
    return [tok for tok in _TOKEN_SPLIT.split(text.lower()) if tok]


# ---------------------------------------------------------------------------
# serialization


def _cell_from_json(obj, where: str) -> CellValue:
    tag = obj.get("t")
    if tag == "i":
        return Instance(str(obj["v"]))
    if tag == "p":
        kind = obj.get("k", "text")
        if kind not in PRIMITIVE_KINDS:
            raise CorpusError(f"{where}: unknown primitive kind {kind!r}")
        return Primitive(kind, str(obj["v"]))
    if tag == "m":
        return MISSING
    raise CorpusError(f"{where}: unknown cell tag {tag!r}")


def _cell_to_json(cell: CellValue) -> dict:
    if isinstance(cell, Instance):
        return {"t": "i", "v": cell.article_id}
    if isinstance(cell, Primitive):
        return {"t": "p", "k": cell.kind, "v": cell.raw}
    return {"t": "m"}


def article_from_json(obj: dict, where: str = "") -> Article:
    try:
        aid = str(obj["id"])
        tables = []
        for t in obj.get("tables", []):
            columns = [
                Column(
                    description=c.get("desc", ""),
                    cells=[_cell_from_json(v, f"{where} table {t['id']}") for v in c.get("cells", [])],
                )
                for c in t.get("columns", [])
            ]
            rows = int(t.get("rows", max((len(c.cells) for c in columns), default=0)))
            if rows < 0:
                raise CorpusError(f"{where}: negative row count in table {t['id']}")
            tables.append(Table(id=str(t["id"]), article_id=aid, columns=columns, row_count=rows))
        return Article(
            id=aid,
            title=obj.get("title", ""),
            abstract=obj.get("abstract", "") or "",
            category_ids=frozenset(obj.get("categories", [])),
            anchor_out=frozenset(obj.get("anchors", [])),
            tables=tables,
        )
    except KeyError as exc:
        raise CorpusError(f"{where}: missing field {exc.args[0]!r}") from None


def article_to_json(article: Article) -> dict:
    return {
        "id": article.id,
        "title": article.title,
        "abstract": article.abstract,
        "categories": sorted(article.category_ids),
        "anchors": sorted(article.anchor_out),
        "tables": [
            {
                "id": t.id,
                "columns": [
                    {"desc": c.description, "cells": [_cell_to_json(v) for v in c.cells]}
                    for c in t.columns
                ],
                "rows": t.row_count,
            }
            for t in article.tables
        ],
    }


def dumps_article(article: Article) -> str:
    return json.dumps(article_to_json(article), ensure_ascii=False, separators=(",", ":"))


def build_corpus(articles: Iterable[Article]) -> Corpus:
    corpus = Corpus()
    seen_tables: set[str] = set()
    for article in articles:
        if article.id in corpus.articles:
            raise IntegrityError(f"duplicate article id {article.id!r}")
        for t in article.tables:
            if t.id in seen_tables:
                raise IntegrityError(f"duplicate table id {t.id!r}")
            seen_tables.add(t.id)
        corpus.articles[article.id] = article
    corpus.warnings = [f"dangling instance reference {i!r}" for i in corpus.dangling_ids()]
    return corpus


def iter_articles(path) -> Iterator[Article]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            yield article_from_json(obj, where=f"{path}:{lineno}")


def load_corpus(path) -> Corpus:
    return build_corpus(iter_articles(path))


def save_corpus(corpus: Corpus, path) -> None:
    Path(path).write_text(dumps_corpus(corpus), encoding="utf-8")


def dumps_corpus(corpus: Corpus) -> str:
    return "".join(dumps_article(a) + "\n" for a in corpus.articles.values())


def corpus_digest(corpus: Corpus) -> str:
    return hashlib.sha256(dumps_corpus(corpus).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# validation


@dataclass
class Finding:
    kind: str  # dangling | empty-schema | row-mismatch | unknown-category
    table_id: Optional[str]
    detail: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.findings)

    def __len__(self) -> int:
        return len(self.findings)

    def of_kind(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]


def validate_corpus(corpus: Corpus, category_ids=None) -> ValidationReport:
    """Report dangling instances, empty schemas and row-count mismatches.

    Pass ``category_ids`` to also flag article categories that the category
    graph does not know. The corpus is never modified.
    """
    report = ValidationReport()
    for article in corpus.articles.values():
        if category_ids is not None:
            for cid in sorted(article.category_ids - set(category_ids)):
                report.findings.append(
                    Finding("unknown-category", None, f"article {article.id}: category {cid!r}")
                )
        for table in article.tables:
            if not table.columns:
                report.findings.append(Finding("empty-schema", table.id, f"table {table.id} has no columns"))
            for pos, col in enumerate(table.columns):
                if len(col.cells) != table.row_count:
                    report.findings.append(
                        Finding(
                            "row-mismatch",
                            table.id,
                            f"table {table.id} column {pos} ({col.description!r}): "
                            f"{len(col.cells)} cells for {table.row_count} rows",
                        )
                    )
                for aid in col.instance_ids():
                    if aid not in corpus.articles:
                        report.findings.append(
                            Finding("dangling", table.id, f"table {table.id} column {pos}: unknown article {aid!r}")
                        )
    return report
