"""Word/graph embeddings, tf-idf vectors and cosine similarity."""
from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .corpus import Article, Corpus, tokenize


def cosine(u, v) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def sparse_cosine(a: dict, b: dict) -> float:
    if not a or not b:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    dot = sum(w * b.get(k, 0.0) for k, w in a.items())
    na = math.sqrt(sum(w * w for w in a.values()))
    nb = math.sqrt(sum(w * w for w in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(-1.0, min(1.0, dot / (na * nb)))


def hash_vector(key: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit vector for ``key``."""
    digest = hashlib.blake2b(f"{seed}:{key}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class VectorTable:
    """Key -> vector mapping; unknown keys yield ``None`` unless hashing is on."""

    def __init__(self, dim: int, vectors: Optional[dict] = None, hash_seed: Optional[int] = None):
        self.dim = int(dim)
        self.vectors: dict[str, np.ndarray] = {}
        self.hash_seed = hash_seed
        for k, v in (vectors or {}).items():
            self.add(k, v)

    def add(self, key: str, vector) -> None:
        v = np.asarray(vector, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"vector for {key!r} has shape {v.shape}, expected ({self.dim},)")
        self.vectors[key] = v

    def get(self, key: str) -> Optional[np.ndarray]:
        v = self.vectors.get(key)
        if v is None and self.hash_seed is not None:
            v = hash_vector(key, self.dim, self.hash_seed)
            self.vectors[key] = v
        return v

    def __contains__(self, key: str) -> bool:
        return key in self.vectors or self.hash_seed is not None

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class Average:
    vector: Optional[np.ndarray]
    misses: int


def avg_embedding(keys: Iterable[str], table: VectorTable) -> Average:
    """Mean vector over the keys the table knows; ``vector`` is None if none."""
    found = []
    misses = 0
    for k in keys:
        v = table.get(k)
        if v is None:
            misses += 1
        else:
            found.append(v)
    if not found:
        return Average(None, misses)
    return Average(np.mean(found, axis=0), misses)


@dataclass
class EmbeddingStore:
    word_vecs: VectorTable
    node_vecs: VectorTable

    @property
    def dim(self) -> int:
        return self.word_vecs.dim

    @classmethod
    def hashed(cls, dim: int = 50, seed: int = 0) -> "EmbeddingStore":
        return cls(VectorTable(dim, hash_seed=seed), VectorTable(dim, hash_seed=seed + 1))

    @classmethod
    def from_files(cls, word_path=None, node_path=None, dim: int = 50, seed: int = 0) -> "EmbeddingStore":
        """Load vector files; a missing path falls back to hash embeddings."""
        words = load_vectors(word_path) if word_path else VectorTable(dim, hash_seed=seed)
        nodes = load_vectors(node_path) if node_path else VectorTable(words.dim, hash_seed=seed + 1)
        return cls(words, nodes)


def load_vectors(path) -> VectorTable:
    """Read the plain-text ``key v1 ... vd`` format (optional ``count dim`` header)."""
    table = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if not parts or not parts[0]:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0])
                    table = VectorTable(int(parts[1]))
                    continue
                except ValueError:
                    pass
            values = [float(x) for x in parts[1:] if x]
            if table is None:
                table = VectorTable(len(values))
            if len(values) != table.dim:
                raise ValueError(f"{path}:{lineno}: expected {table.dim} values, got {len(values)}")
            table.add(parts[0], values)
    if table is None:
        raise ValueError(f"{path}: no vectors")
    return table


def save_vectors(table: VectorTable, path, keys=None) -> None:
    keys = sorted(table.vectors) if keys is None else keys
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(keys)} {table.dim}\n")
        for k in keys:
            fh.write(k + " " + " ".join(repr(float(x)) for x in table.vectors[k]) + "\n")


# ---------------------------------------------------------------------------
# tf-idf


@dataclass
class TfIdfIndex:
    doc_freq: Counter
    num_docs: int
    tokens: dict[str, list[str]] = field(default_factory=dict)
    _weights: dict[str, dict] = field(default_factory=dict)

    @classmethod
    def build(cls, corpus: Corpus, article_ids=None) -> "TfIdfIndex":
        ids = sorted(corpus.articles) if article_ids is None else sorted(article_ids)
        df = Counter()
        tokens = {}
        for aid in ids:
            toks = tokenize(corpus[aid].abstract)
            tokens[aid] = toks
            df.update(set(toks))
        return cls(df, len(ids), tokens)

    def idf(self, token: str) -> float:
        return math.log(self.num_docs / (1 + self.doc_freq.get(token, 0)))

    def weights_for_tokens(self, toks) -> dict[str, float]:
        out = {}
        for tok, tf in sorted(Counter(toks).items()):
            w = tf * self.idf(tok)
            if w > 0.0:
                out[tok] = w
        return out

    def vector(self, article: Article) -> dict[str, float]:
        hit = self._weights.get(article.id)
        if hit is None:
            toks = self.tokens.get(article.id)
            if toks is None:
                toks = tokenize(article.abstract)
            hit = self.weights_for_tokens(toks)
            self._weights[article.id] = hit
        return hit


def tfidf_vector(article: Article, index: TfIdfIndex) -> dict[str, float]:
    return index.vector(article)


def doc_embedding(article: Article, store: EmbeddingStore, index: TfIdfIndex) -> np.ndarray:
    """Tf-idf weighted mean of the abstract's word vectors.

    Falls back to a plain mean when every known token carries zero weight,
    and to the zero vector when the abstract has no known token.
    """
    toks = tokenize(article.abstract)
    weights = index.weights_for_tokens(toks)
    acc = np.zeros(store.word_vecs.dim)
    total = 0.0
    for tok, w in weights.items():
        v = store.word_vecs.get(tok)
        if v is not None:
            acc += w * v
            total += w
    if total > 0.0:
        return acc / total
    avg = avg_embedding(toks, store.word_vecs)
    return avg.vector if avg.vector is not None else acc
