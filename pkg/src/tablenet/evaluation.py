"""Candidate-generation and alignment metrics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus import RelationLabel

CLASSES = (RelationLabel.EQUIVALENT, RelationLabel.SUBPARTOF, RelationLabel.NONE)


def delta(retained: int, k: int, total_articles: int) -> float:
    """Reduction rate against the greedy universe of k * |A| pairs."""
    universe = k * total_articles
    if universe <= 0:
        raise ValueError("k * total_articles must be positive")
    if retained > universe:
        raise ValueError(f"retained pairs {retained} exceed the greedy universe {universe}")
    return min(1.0, max(0.0, 1.0 - retained / universe))


@dataclass
class RecallScores:
    micro: float
    macro: float
    excluded_sources: list = field(default_factory=list)


def recall_scores(retained_relevant: Mapping[str, int], all_relevant: Mapping[str, int]) -> RecallScores:
    """Micro recall over all relevant pairs and macro recall over sources.

    Both arguments map a source article to a count; sources without relevant
    pairs are left out of the macro average and listed in ``excluded_sources``.
    """
    total = sum(all_relevant.values())
    if total <= 0:
        raise ValueError("no relevant pairs")
    hit = sum(retained_relevant.get(s, 0) for s in all_relevant)
    per_source, excluded = [], []
    for s in sorted(all_relevant):
        if all_relevant[s] > 0:
            per_source.append(retained_relevant.get(s, 0) / all_relevant[s])
        else:
            excluded.append(s)
    return RecallScores(hit / total, float(np.mean(per_source)), excluded)


def pair_recall(retained_pairs, relevant_pairs) -> RecallScores:
    """recall_scores from pair sets, grouped by source article (first element)."""
    retained_pairs = set(retained_pairs)
    all_rel, hit = {}, {}
    for a, b in relevant_pairs:
        all_rel[a] = all_rel.get(a, 0) + 1
        if (a, b) in retained_pairs:
            hit[a] = hit.get(a, 0) + 1
    return recall_scores(hit, all_rel)


@dataclass
class ClassScores:
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    support: int


@dataclass
class EvalReport:
    confusion: np.ndarray  # rows gold, columns predicted
    per_class: dict
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    delta: Optional[float] = None
    micro_recall: Optional[float] = None
    candidate_macro_recall: Optional[float] = None
    k: Optional[int] = None
    total_articles: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "per_class": {RelationLabel(c).tag: vars(s) for c, s in self.per_class.items()},
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "delta": self.delta,
            "micro_recall": self.micro_recall,
            "candidate_macro_recall": self.candidate_macro_recall,
            "k": self.k,
            "total_articles": self.total_articles,
        }

    def to_text(self) -> str:
        return format_alignment_table({"model": self})


def _ratio(num, den) -> Optional[float]:
    return None if den == 0 else num / den


def prf_report(predictions: Sequence[int], gold: Sequence[int]) -> EvalReport:
    """Per-class precision/recall/F1 from the 3x3 confusion matrix.

    Undefined rates (no gold or no predicted items of a class) are None and
    are skipped by the macro averages.
    """
    pred = np.asarray([int(p) for p in predictions], dtype=int)
    gold = np.asarray([int(g) for g in gold], dtype=int)
    if len(pred) != len(gold):
        raise ValueError("predictions and gold differ in length")
    n = len(CLASSES)
    conf = np.zeros((n, n), dtype=int)
    np.add.at(conf, (gold, pred), 1)
    per = {}
    for c in range(n):
        tp = conf[c, c]
        p = _ratio(tp, conf[:, c].sum())
        r = _ratio(tp, conf[c, :].sum())
        if p is None or r is None:
            f = None
        else:
            f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        per[CLASSES[c]] = ClassScores(p, r, f, int(conf[c, :].sum()))

    def macro(attr):
        vals = [getattr(s, attr) for s in per.values() if getattr(s, attr) is not None]
        return float(np.mean(vals)) if vals else 0.0

    acc = float(np.trace(conf) / conf.sum()) if conf.sum() else 0.0
    return EvalReport(conf, per, acc, macro("precision"), macro("recall"), macro("f1"))


def binary_prf(predicted: Sequence[bool], gold: Sequence[bool]) -> dict:
    pred = np.asarray(predicted, bool)
    gold = np.asarray(gold, bool)
    tp = int(np.sum(pred & gold))
    fp = int(np.sum(pred & ~gold))
    fn = int(np.sum(~pred & gold))
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    f = None if p is None or r is None else (0.0 if p + r == 0 else 2 * p * r / (p + r))
    return {"precision": p, "recall": r, "f1": f, "support": int(gold.sum())}


# ---------------------------------------------------------------------------
# text tables


def _cell(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.3f}" if not math.isnan(x) else "-"
    return f"{x:,}" if isinstance(x, int) else str(x)


def format_rows(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [list(header)] + [[_cell(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def format_candidate_table(rows: Mapping[str, dict]) -> str:
    """Pairs / reduction / relevant pairs / recall, one line per method."""
    header = ["method", "pairs", "delta", "rel. pairs", "R_micro", "R"]
    body = [[name, r.get("pairs"), r.get("delta"), r.get("relevant"), r.get("micro_recall"), r.get("macro_recall")]
            for name, r in rows.items()]
    return format_rows(header, body)


def format_alignment_table(reports: Mapping[str, EvalReport]) -> str:
    header = ["model"]
    for c in CLASSES:
        header += [f"{c.tag}:P", f"{c.tag}:R", f"{c.tag}:F1"]
    header += ["Acc", "R", "F1"]
    body = []
    for name, rep in reports.items():
        row = [name]
        for c in CLASSES:
            s = rep.per_class[c]
            row += [s.precision, s.recall, s.f1]
        row += [rep.accuracy, rep.macro_recall, rep.macro_f1]
        body.append(row)
    return format_rows(header, body)


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
