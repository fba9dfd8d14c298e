"""Column representations for the alignment model.

A column is described by up to three components, summed element-wise:
the mean word vector of its description (``desc``), the mean node vector of
its instance cells (``val``) and the mean node vector of its LCA categories
(``type``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..catgraph import CategoryGraph
from ..colsem import column_lca
from ..corpus import Column, Table, tokenize
from ..embed import EmbeddingStore, avg_embedding

log = logging.getLogger(__name__)

MODES = ("desc", "val", "type")
COMPONENTS = {"desc": ("desc",), "val": ("desc", "val"), "type": ("desc", "val", "type")}


def canonical_mode(mode: str) -> str:
    m = mode.lstrip("+").lower()
    if m not in MODES:
        raise ValueError(f"unknown representation mode {mode!r}")
    return m


@dataclass
class ColumnVector:
    parts: dict  # component name -> vector (zeros when absent)
    used: dict = field(default_factory=dict)  # component name -> found?

    @property
    def vector(self) -> np.ndarray:
        """Element-wise sum of the components."""
        vecs = list(self.parts.values())
        dims = {v.shape for v in vecs}
        if len(dims) != 1:
            raise ValueError(f"components have different dimensions {sorted(dims)}; project them first")
        return np.sum(vecs, axis=0)


def encode_column(column: Column, mode: str, store: EmbeddingStore, graph: CategoryGraph = None) -> ColumnVector:
    mode = canonical_mode(mode)
    parts, used = {}, {}
    desc = avg_embedding(tokenize(column.description), store.word_vecs).vector
    used["desc"] = desc is not None
    parts["desc"] = desc if desc is not None else np.zeros(store.word_vecs.dim)
    if mode in ("val", "type"):
        val = avg_embedding(column.instance_ids(), store.node_vecs).vector
        used["val"] = val is not None
        parts["val"] = val if val is not None else np.zeros(store.node_vecs.dim)
    if mode == "type":
        if graph is None:
            raise ValueError("type mode needs the category graph")
        lca = column_lca(column, graph)
        typ = None if lca is None else avg_embedding(sorted(lca), store.node_vecs).vector
        used["type"] = typ is not None
        parts["type"] = typ if typ is not None else np.zeros(store.node_vecs.dim)
    if not any(used.values()):
        log.warning("column %r has no usable representation; encoded as zeros", column.description)
    return ColumnVector(parts, used)


@dataclass
class EncodedTable:
    table_id: str
    parts: dict  # component -> (columns, dim)

    @property
    def width(self) -> int:
        return next(iter(self.parts.values())).shape[0]


def encode_table(table: Table, mode: str, store: EmbeddingStore, graph: CategoryGraph = None) -> EncodedTable:
    if not table.columns:
        raise ValueError(f"table {table.id} has an empty schema")
    cols = [encode_column(c, mode, store, graph) for c in table.columns]
    names = COMPONENTS[canonical_mode(mode)]
    return EncodedTable(table.id, {n: np.vstack([c.parts[n] for c in cols]) for n in names})
