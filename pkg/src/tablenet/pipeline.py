"""Stage-by-stage batch pipeline.

Each stage reads files from the working directory and writes new ones. Every
artifact is stamped with the hash of the configuration that produced it and
the tool version; a manifest per stage records input and output digests so
that rerunning an up-to-date stage is a no-op.

Stages and their artifacts (relative to the working directory)::

    synth            inputs/*            (only when the config has a synth section)
    normalize-graph  graph.json
    featurize        features.tsv, sources.json
    filter           thresholds.json, filtered.tsv
    train-candgen    rf_model.json
    classify-pairs   candidates.tsv
    baseline         baselines.json
    train-align      align_model.json, history.jsonl, align_split.json
    predict          predictions.tsv, candidate_predictions.tsv
    evaluate         report.json, report.txt
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .align import AlignmentModel, PairExample, TrainConfig, encode_table, predict_examples, split_dataset, train
from .baselines import (
    AnchorGraph, fusion_schema_score, pairs_deepest_category, pairs_milne_witten, pairs_same_direct_category,
    pairs_same_parent_category, tune_fusion_threshold,
)
from .candgen import (
    DEFAULT_CRITERIA, FeatureContext, ConfigurationError, classify_pairs, compute_thresholds, default_forest_params,
    featurize_pairs, filter_pairs, read_features, relevance_scores, train_relevance_model, write_features,
)
from .catgraph import CategoryGraph, GraphConfigError, normalize, read_associations, read_edges
from .colsem import KbStore, column_lca
from .corpus import Corpus, CorpusError, IntegrityError, RelationLabel, load_corpus
from .embed import EmbeddingStore
from .evaluation import binary_prf, delta, dump_json, format_alignment_table, format_candidate_table, \
    format_rows, pair_recall, prf_report
from .forest import ForestParams, RandomForestModel
from .synth import SynthSpec, generate_synthetic_corpus, read_gold

log = logging.getLogger(__name__)

TOOL_VERSION = __version__

STAGES = (
    "synth", "normalize-graph", "featurize", "filter", "train-candgen", "classify-pairs",
    "baseline", "train-align", "predict", "evaluate",
)

INPUT_FILES = {
    "corpus": "corpus.jsonl",
    "edges": "edges.tsv",
    "associations": "associations.tsv",
    "categories": "categories.json",
    "triples": "triples.tsv",
    "types": "types.tsv",
    "word_embeddings": "words.vec",
    "node_embeddings": "nodes.vec",
    "gold": "gold.tsv",
}
OPTIONAL_INPUTS = {"categories", "triples", "types", "word_embeddings", "node_embeddings", "gold"}


class PipelineError(Exception):
    exit_code = 2


class UsageError(PipelineError):
    exit_code = 1


class DataError(PipelineError):
    exit_code = 2


class HashMismatch(PipelineError):
    exit_code = 3


# ---------------------------------------------------------------------------
# configuration


@dataclass
class PipelineConfig:
    workdir: Path
    inputs: dict = field(default_factory=dict)  # name -> path
    seed: int = 0
    root: Optional[str] = None
    embedding_dim: int = 50
    criteria: tuple = DEFAULT_CRITERIA
    num_trees: int = 100
    min_samples_split: Optional[int] = None
    tau: float = 0.5
    source_train_fraction: float = 0.6
    mode: str = "type"
    train: TrainConfig = field(default_factory=TrainConfig)
    none_share: float = 0.52
    synth: Optional[SynthSpec] = None
    workers: int = 1

    @classmethod
    def from_dict(cls, obj: dict, base_dir=".", overrides: Optional[dict] = None) -> "PipelineConfig":
        obj = copy.deepcopy(obj)
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        base = Path(base_dir)
        try:
            seed = int(overrides.get("seed", obj.get("seed", 0)))
            workdir = Path(overrides.get("workdir") or base / obj.get("workdir", "work"))
            cg = obj.get("candgen", {})
            al = obj.get("align", {})
            synth = None
            if "synth" in obj:
                sd = dict(obj["synth"])
                sd.setdefault("seed", seed)
                if "seed" in overrides:
                    sd["seed"] = seed
                synth = SynthSpec.from_json(sd)
            inputs = {k: str(base / v) for k, v in obj.get("inputs", {}).items()}
            unknown = set(inputs) - set(INPUT_FILES)
            if unknown:
                raise UsageError(f"unknown input names {sorted(unknown)}")
            if synth is not None:
                for k, name in INPUT_FILES.items():
                    inputs.setdefault(k, str(workdir / "inputs" / name))
            tc = TrainConfig(
                epochs=int(al.get("epochs", 50)),
                split=tuple(al.get("split", (0.6, 0.1, 0.3))),
                learning_rate=float(al.get("learning_rate", 1e-3)),
                batch_size=int(al.get("batch_size", 32)),
                hidden=int(al.get("hidden", 100)),
                seed=seed,
            )
            cfg = cls(
                workdir=workdir,
                inputs=inputs,
                seed=seed,
                root=obj.get("graph", {}).get("root"),
                embedding_dim=int(obj.get("embeddings", {}).get("dim", 50)),
                criteria=tuple(cg.get("criteria", DEFAULT_CRITERIA)),
                num_trees=int(cg.get("num_trees", 100)),
                min_samples_split=cg.get("min_samples_split"),
                tau=float(overrides.get("tau", cg.get("tau", 0.5))),
                source_train_fraction=float(cg.get("train_fraction", 0.6)),
                mode=str(overrides.get("mode", al.get("mode", "type"))).lstrip("+"),
                train=tc,
                none_share=float(al.get("none_share", 0.52)),
                synth=synth,
                workers=int(overrides.get("workers", obj.get("workers", 1))),
            )
        except (TypeError, ValueError, KeyError) as exc:
            if isinstance(exc, PipelineError):
                raise
            raise UsageError(f"invalid configuration: {exc}") from exc
        if not 0.0 <= cfg.tau <= 1.0:
            raise UsageError("tau must lie in [0, 1]")
        if cfg.mode not in ("desc", "val", "type"):
            raise UsageError(f"unknown mode {cfg.mode!r}")
        if cfg.workers < 1:
            raise UsageError("workers must be >= 1")
        if "corpus" not in cfg.inputs:
            raise UsageError("config names no corpus input and has no synth section")
        return cfg

    @classmethod
    def load(cls, path, overrides=None) -> "PipelineConfig":
        p = Path(path)
        try:
            obj = json.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise UsageError(f"config file not found: {p}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {p} is not valid JSON: {exc}") from exc
        return cls.from_dict(obj, p.parent, overrides)

    def semantic(self) -> dict:
        """Everything that can change an output; paths and worker count excluded."""
        return {
            "seed": self.seed,
            "root": self.root,
            "embedding_dim": self.embedding_dim,
            "criteria": list(self.criteria),
            "num_trees": self.num_trees,
            "min_samples_split": self.min_samples_split,
            "tau": self.tau,
            "source_train_fraction": self.source_train_fraction,
            "mode": self.mode,
            "train": {
                "epochs": self.train.epochs, "split": list(self.train.split),
                "learning_rate": self.train.learning_rate, "batch_size": self.train.batch_size,
                "hidden": self.train.hidden, "seed": self.train.seed,
            },
            "none_share": self.none_share,
            "synth": None if self.synth is None else self.synth.to_json(),
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# stamps and manifests


def stamp(config: PipelineConfig, stage: str) -> dict:
    return {"config_hash": config.config_hash(), "tool_version": TOOL_VERSION, "stage": stage}


def _stamp_line(st: dict) -> str:
    return " ".join(f"{k}={st[k]}" for k in ("config_hash", "tool_version", "stage"))


def write_json_artifact(path, payload: dict, st: dict) -> None:
    dump_json({"_artifact": st, **payload}, path)


def read_json_artifact(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_stamp(path) -> Optional[dict]:
    """The stamp embedded in an artifact, or None if it carries none."""
    p = Path(path)
    if p.suffix == ".json":
        return read_json_artifact(p).get("_artifact")
    with open(p, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if p.suffix == ".jsonl":
        try:
            return json.loads(first).get("_artifact")
        except json.JSONDecodeError:
            return None
    if first.startswith("#"):
        fields = dict(tok.split("=", 1) for tok in first[1:].split() if "=" in tok)
        if "config_hash" in fields:
            return fields
    return None


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class StageResult:
    stage: str
    skipped: bool
    outputs: list


# ---------------------------------------------------------------------------
# stage wiring


def _artifact(config, name) -> Path:
    return config.workdir / name


# upstream artifacts: stage -> [(file, producing stage)]
UPSTREAM = {
    "synth": [],
    "normalize-graph": [],
    "featurize": [("graph.json", "normalize-graph")],
    "filter": [("features.tsv", "featurize")],
    "train-candgen": [("filtered.tsv", "filter"), ("sources.json", "featurize")],
    "classify-pairs": [("rf_model.json", "train-candgen"), ("filtered.tsv", "filter"), ("sources.json", "featurize")],
    "baseline": [("graph.json", "normalize-graph"), ("sources.json", "featurize")],
    "train-align": [("graph.json", "normalize-graph")],
    "predict": [("align_model.json", "train-align"), ("align_split.json", "train-align"),
                ("graph.json", "normalize-graph"), ("candidates.tsv", "classify-pairs")],
    "evaluate": [("sources.json", "featurize"), ("filtered.tsv", "filter"), ("candidates.tsv", "classify-pairs"),
                 ("baselines.json", "baseline"), ("predictions.tsv", "predict")],
}

OUTPUTS = {
    "synth": [f"inputs/{n}" for n in INPUT_FILES.values()] + ["inputs/tables.json", "inputs/STAMP.json"],
    "normalize-graph": ["graph.json"],
    "featurize": ["features.tsv", "sources.json"],
    "filter": ["thresholds.json", "filtered.tsv"],
    "train-candgen": ["rf_model.json"],
    "classify-pairs": ["candidates.tsv"],
    "baseline": ["baselines.json"],
    "train-align": ["align_model.json", "history.jsonl", "align_split.json"],
    "predict": ["predictions.tsv", "candidate_predictions.tsv"],
    "evaluate": ["report.json", "report.txt"],
}

# raw inputs read by each stage
RAW_INPUTS = {
    "synth": [],
    "normalize-graph": ["edges", "associations", "categories"],
    "featurize": ["corpus", "triples", "types", "word_embeddings", "node_embeddings", "gold"],
    "filter": [],
    "train-candgen": [],
    "classify-pairs": [],
    "baseline": ["corpus", "gold"],
    "train-align": ["corpus", "word_embeddings", "node_embeddings", "gold"],
    "predict": ["corpus", "word_embeddings", "node_embeddings"],
    "evaluate": ["gold"],
}


def _raw_paths(config: PipelineConfig, stage: str) -> list[Path]:
    out = []
    for name in RAW_INPUTS[stage]:
        path = config.inputs.get(name)
        if path is None:
            if name in OPTIONAL_INPUTS:
                continue
            raise DataError(f"stage {stage!r} needs input {name!r}, which the config does not name")
        p = Path(path)
        if not p.exists():
            if name in OPTIONAL_INPUTS and not (config.synth is not None):
                continue
            hint = "; run stage 'synth' first" if config.synth is not None else ""
            raise DataError(f"input file {p} ({name}) does not exist{hint}")
        out.append(p)
    return out


def _check_upstream(config: PipelineConfig, stage: str, force: bool) -> list[Path]:
    paths = []
    current = config.config_hash()
    for name, producer in UPSTREAM[stage]:
        p = _artifact(config, name)
        if not p.exists():
            raise DataError(f"missing artifact {p}; run stage {producer!r} first")
        st = read_stamp(p)
        if st is None:
            raise HashMismatch(f"artifact {p} carries no config stamp")
        if st.get("config_hash") != current and not force:
            raise HashMismatch(
                f"artifact {p} was produced under config {st.get('config_hash')}, current config is {current}; "
                f"rerun stage {producer!r} or pass --force")
        paths.append(p)
    return paths


def _manifest_path(config, stage) -> Path:
    return config.workdir / "manifests" / f"{stage}.json"


def _up_to_date(config, stage, inputs: list[Path]) -> bool:
    mp = _manifest_path(config, stage)
    if not mp.exists():
        return False
    try:
        man = json.loads(mp.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return False
    if man.get("config_hash") != config.config_hash() or man.get("tool_version") != TOOL_VERSION:
        return False
    if man.get("inputs") != {str(p): file_digest(p) for p in inputs}:
        return False
    for name, digest in man.get("outputs", {}).items():
        p = Path(name)
        if not p.exists() or file_digest(p) != digest:
            return False
    return True


def _write_manifest(config, stage, inputs, outputs) -> None:
    mp = _manifest_path(config, stage)
    mp.parent.mkdir(parents=True, exist_ok=True)
    man = {
        "stage": stage,
        "config_hash": config.config_hash(),
        "tool_version": TOOL_VERSION,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {str(p): file_digest(p) for p in outputs},
    }
    mp.write_text(json.dumps(man, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def run_stage(stage: str, config: PipelineConfig, force: bool = False) -> StageResult:
    """Run one stage; a no-op when its manifest shows the outputs are current."""
    if stage not in STAGES:
        raise UsageError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    if stage == "synth" and config.synth is None:
        raise UsageError("stage 'synth' needs a 'synth' section in the config")
    config.workdir.mkdir(parents=True, exist_ok=True)
    upstream = _check_upstream(config, stage, force)
    raw = _raw_paths(config, stage)
    inputs = upstream + raw
    outputs = [config.workdir / o for o in OUTPUTS[stage]]
    if not force and _up_to_date(config, stage, inputs):
        log.info("stage %s is up to date", stage)
        return StageResult(stage, True, outputs)
    log.info("running stage %s", stage)
    try:
        _STAGE_FUNCS[stage](config, force)
    except (CorpusError, GraphConfigError, ConfigurationError, FileNotFoundError) as exc:
        if isinstance(exc, IntegrityError):
            raise HashMismatch(str(exc)) from exc
        raise DataError(f"stage {stage!r}: {exc}") from exc
    _write_manifest(config, stage, inputs, outputs)
    return StageResult(stage, False, outputs)


def run_all(config: PipelineConfig, force: bool = False) -> list[StageResult]:
    stages = [s for s in STAGES if s != "synth" or config.synth is not None]
    return [run_stage(s, config, force) for s in stages]


# ---------------------------------------------------------------------------
# shared loaders


def _root(config: PipelineConfig) -> tuple[str, dict]:
    names = {}
    root = config.root
    cat_path = config.inputs.get("categories")
    if cat_path and Path(cat_path).exists():
        obj = json.loads(Path(cat_path).read_text(encoding="utf-8"))
        names = dict(obj.get("names", {}))
        root = root or obj.get("root")
    if root is None:
        raise DataError("no root category: set graph.root in the config or provide a categories file")
    return root, names


def _graph(config) -> CategoryGraph:
    return CategoryGraph.from_json(read_json_artifact(_artifact(config, "graph.json"))["graph"])


def _store(config) -> EmbeddingStore:
    w = config.inputs.get("word_embeddings")
    n = config.inputs.get("node_embeddings")
    w = w if w and Path(w).exists() else None
    n = n if n and Path(n).exists() else None
    return EmbeddingStore.from_files(w, n, dim=config.embedding_dim, seed=config.seed)


def _kb(config) -> KbStore:
    t = config.inputs.get("triples")
    y = config.inputs.get("types")
    return KbStore.load(t if t and Path(t).exists() else None, y if y and Path(y).exists() else None)


def _gold(config) -> list:
    g = config.inputs.get("gold")
    if not g or not Path(g).exists():
        return []
    return read_gold(g)


def relevant_article_pairs(gold) -> set:
    out = set()
    for g in gold:
        out.add((g.a_i, g.a_j))
        out.add((g.a_j, g.a_i))
    return out


def split_sources(articles, fraction: float, seed: int) -> tuple[list, list]:
    ordered = sorted(articles)
    perm = np.random.default_rng([seed, 1]).permutation(len(ordered))
    n = int(round(fraction * len(ordered)))
    return sorted(ordered[i] for i in perm[:n]), sorted(ordered[i] for i in perm[n:])


def _sources(config) -> dict:
    return read_json_artifact(_artifact(config, "sources.json"))


def _write_tsv(path, header, rows, st) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {_stamp_line(st)}\n")
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_tsv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter="\t") if r and not r[0].startswith("#")]
    return [dict(zip(rows[0], r)) for r in rows[1:]]


# ---------------------------------------------------------------------------
# alignment dataset


@dataclass
class LabeledPair:
    key: str
    t_i: str
    t_j: str
    label: int


def alignment_pairs(corpus: Corpus, gold, seed: int, none_share: float = 0.52) -> list[LabeledPair]:
    """Planted relations plus sampled unrelated table pairs from related article pairs.

    Unrelated pairs are drawn so that they make up ``none_share`` of the set.
    """
    related = {(g.t_i, g.t_j): int(g.label) for g in gold}
    out = [LabeledPair(f"{a}|{b}", a, b, lab) for (a, b), lab in sorted(related.items())]
    article_pairs = sorted({tuple(sorted((g.a_i, g.a_j))) for g in gold})
    rng = np.random.default_rng([seed, 2])
    pool = []
    for a, b in article_pairs:
        for ti in corpus[a].tables:
            for tj in corpus[b].tables:
                if (ti.id, tj.id) in related or (tj.id, ti.id) in related:
                    continue
                pool.append((ti.id, tj.id))
    if not 0.0 <= none_share < 1.0:
        raise ValueError("none_share must lie in [0, 1)")
    n_none = min(len(pool), int(round(len(out) * none_share / (1.0 - none_share))))
    for idx in sorted(rng.choice(len(pool), size=n_none, replace=False)):
        a, b = pool[idx]
        if rng.random() < 0.5:
            a, b = b, a
        out.append(LabeledPair(f"{a}|{b}", a, b, int(RelationLabel.NONE)))
    return out


def _encode_pairs(pairs, corpus, mode, store, graph) -> list[PairExample]:
    tables = corpus.tables()
    cache = {}

    def enc(t):
        if t not in cache:
            cache[t] = encode_table(tables[t], mode, store, graph)
        return cache[t]

    return [PairExample(p.key, enc(p.t_i), enc(p.t_j), p.label) for p in pairs]


def _alignment_split(config, corpus, gold):
    pairs = alignment_pairs(corpus, gold, config.seed, config.none_share)
    if not pairs:
        raise DataError("no labeled table pairs: the gold file is missing or empty")
    # both orders of a pair land in the same split; split on lightweight stand-ins
    groups = {}
    for p in pairs:
        groups.setdefault("|".join(sorted((p.t_i, p.t_j))), []).append(p)
    stand = [PairExample(k, None, None) for k in groups]
    parts = split_dataset(stand, config.train.split, config.seed)
    return tuple(sorted((p for e in part for p in groups[e.key]), key=lambda p: p.key) for part in parts)


# ---------------------------------------------------------------------------
# stages


def stage_synth(config: PipelineConfig, force: bool) -> None:
    data = generate_synthetic_corpus(config.synth)
    out = config.workdir / "inputs"
    data.write(out)
    dump_json({"_artifact": stamp(config, "synth"), "spec": config.synth.to_json()}, out / "STAMP.json")


def stage_normalize_graph(config, force) -> None:
    root, names = _root(config)
    edges = read_edges(config.inputs["edges"])
    assoc = read_associations(config.inputs["associations"])
    graph = normalize(edges, assoc, root, names)
    log.info("graph: %d categories, %d edges removed, %d unreachable",
             len(graph.categories), len(graph.removed), len(graph.unreachable))
    write_json_artifact(_artifact(config, "graph.json"), {"graph": graph.to_json()}, stamp(config, "normalize-graph"))


def stage_featurize(config, force) -> None:
    corpus = load_corpus(config.inputs["corpus"])
    graph = _graph(config)
    ctx = FeatureContext(corpus, graph, _store(config), _kb(config))
    articles = corpus.table_articles()
    train_src, eval_src = split_sources(articles, config.source_train_fraction, config.seed)
    relevant = relevant_article_pairs(_gold(config))
    pairs = [(a, b) for a in sorted(articles) for b in articles if b != a]
    labels = {p: int(p in relevant) for p in pairs} if relevant else None
    feats = featurize_pairs(pairs, ctx, labels, workers=config.workers)
    write_features(_artifact(config, "features.tsv"), feats, _stamp_line(stamp(config, "featurize")))
    write_json_artifact(_artifact(config, "sources.json"), {
        "train_sources": train_src,
        "eval_sources": eval_src,
        "total_articles": len(articles),
    }, stamp(config, "featurize"))


def stage_filter(config, force) -> None:
    feats = read_features(_artifact(config, "features.tsv"))
    th = compute_thresholds(feats)
    kept = filter_pairs(feats, th, config.criteria)
    write_json_artifact(_artifact(config, "thresholds.json"),
                        {**th.to_json(), "criteria": list(config.criteria)}, stamp(config, "filter"))
    write_features(_artifact(config, "filtered.tsv"), kept, _stamp_line(stamp(config, "filter")))


def _forest_params(config, n_train) -> ForestParams:
    params = default_forest_params(n_train, config.seed)
    params.num_trees = config.num_trees
    if config.min_samples_split is not None:
        params.min_samples_split = int(config.min_samples_split)
    return params


def stage_train_candgen(config, force) -> None:
    src = set(_sources(config)["train_sources"])
    feats = [f for f in read_features(_artifact(config, "filtered.tsv")) if f.a_i in src and f.label is not None]
    if not feats:
        raise DataError("no labeled filtered pairs for the training sources (is the gold file present?)")
    model = train_relevance_model(feats, _forest_params(config, len(feats)), workers=config.workers)
    write_json_artifact(_artifact(config, "rf_model.json"), model.to_json(), stamp(config, "train-candgen"))


def stage_classify_pairs(config, force) -> None:
    src = set(_sources(config)["eval_sources"])
    feats = [f for f in read_features(_artifact(config, "filtered.tsv")) if f.a_i in src]
    model = RandomForestModel.from_json(read_json_artifact(_artifact(config, "rf_model.json")))
    scores = relevance_scores(model, feats)
    kept = {f.pair for f in classify_pairs(model, feats, config.tau)}
    rows = [(f.a_i, f.a_j, repr(float(s))) for f, s in zip(feats, scores) if f.pair in kept]
    _write_tsv(_artifact(config, "candidates.tsv"), ["a_i", "a_j", "score"], rows, stamp(config, "classify-pairs"))


def _candidate_row(pairs, relevant, k, total, eval_src) -> dict:
    rel = [p for p in relevant if p[0] in eval_src]
    row = {"pairs": len(pairs), "delta": delta(len(pairs), k, total)}
    if rel:
        rec = pair_recall(pairs, rel)
        row.update(relevant=len(set(pairs) & set(rel)), micro_recall=rec.micro, macro_recall=rec.macro)
    return row


def stage_baseline(config, force) -> None:
    corpus = load_corpus(config.inputs["corpus"])
    graph = _graph(config)
    gold = _gold(config)
    src_info = _sources(config)
    eval_src = src_info["eval_sources"]
    k, total = len(eval_src), src_info["total_articles"]
    relevant = relevant_article_pairs(gold)
    es = set(eval_src)
    rows = {}
    greedy = [(a, b) for a in eval_src for b in corpus.table_articles() if b != a]
    rows["G"] = _candidate_row(greedy, relevant, k, total, es)
    rows["C1"] = _candidate_row(pairs_same_direct_category(eval_src, corpus, graph), relevant, k, total, es)
    rows["C2"] = _candidate_row(pairs_deepest_category(eval_src, corpus, graph), relevant, k, total, es)
    rows["PC"] = _candidate_row(pairs_same_parent_category(eval_src, corpus, graph), relevant, k, total, es)
    mw_pairs, mw_tau = pairs_milne_witten(eval_src, corpus, AnchorGraph.from_corpus(corpus))
    rows["MW"] = {**_candidate_row(mw_pairs, relevant, k, total, es), "tau": mw_tau}

    fusion = None
    if gold:
        train_pairs, _, test_pairs = _alignment_split(config, corpus, gold)
        tables = corpus.tables()
        types = {}

        def lcas(t):
            if t not in types:
                types[t] = [column_lca(c, graph) for c in tables[t].columns]
            return types[t]

        def score(p):
            return fusion_schema_score(tables[p.t_i], tables[p.t_j], graph, lcas(p.t_i), lcas(p.t_j))

        tr_scores = [score(p) for p in train_pairs]
        tau, tr_f1 = tune_fusion_threshold(tr_scores, [p.label != RelationLabel.NONE for p in train_pairs])
        te_scores = [score(p) for p in test_pairs]
        res = binary_prf([s >= tau for s in te_scores], [p.label != RelationLabel.NONE for p in test_pairs])
        fusion = {"tau": tau, "train_f1": tr_f1, "test": res}
    write_json_artifact(_artifact(config, "baselines.json"), {"candidates": rows, "fusion": fusion,
                                                               "k": k, "total_articles": total},
                        stamp(config, "baseline"))


def stage_train_align(config, force) -> None:
    corpus = load_corpus(config.inputs["corpus"])
    graph = _graph(config)
    gold = _gold(config)
    store = _store(config)
    train_p, val_p, test_p = _alignment_split(config, corpus, gold)
    mode = config.mode
    tr = _encode_pairs(train_p, corpus, mode, store, graph)
    va = _encode_pairs(val_p, corpus, mode, store, graph)
    result = train(tr, va, config.train, store.word_vecs.dim, store.node_vecs.dim, mode)
    st = stamp(config, "train-align")
    write_json_artifact(_artifact(config, "align_model.json"),
                        {**result.model.to_json(), "best_epoch": result.best_epoch}, st)
    with open(_artifact(config, "history.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_artifact": st}, sort_keys=True) + "\n")
        for m in result.history:
            fh.write(json.dumps(vars(m), sort_keys=True) + "\n")
    write_json_artifact(_artifact(config, "align_split.json"), {
        name: [[p.key, p.t_i, p.t_j, p.label] for p in part]
        for name, part in (("train", train_p), ("validation", val_p), ("test", test_p))
    }, st)


def _prob_cells(p):
    return [repr(float(x)) for x in p.probabilities]


def stage_predict(config, force) -> None:
    corpus = load_corpus(config.inputs["corpus"])
    graph = _graph(config)
    store = _store(config)
    model = AlignmentModel.from_json(read_json_artifact(_artifact(config, "align_model.json")))
    split = read_json_artifact(_artifact(config, "align_split.json"))
    test = [LabeledPair(*row) for row in split["test"]]
    ex = _encode_pairs(test, corpus, model.mode, store, graph)
    preds = predict_examples(model, ex)
    st = stamp(config, "predict")
    header = ["key", "t_i", "t_j", "gold", "predicted", "p_equivalent", "p_subPartOf", "p_none"]
    _write_tsv(_artifact(config, "predictions.tsv"), header,
               [[p.key, lp.t_i, lp.t_j, RelationLabel(lp.label).tag, p.label.tag, *_prob_cells(p)]
                for lp, p in zip(test, preds)], st)

    cands = _read_tsv(_artifact(config, "candidates.tsv"))
    pairs = []
    for row in cands:
        for ti in corpus[row["a_i"]].tables:
            for tj in corpus[row["a_j"]].tables:
                pairs.append(LabeledPair(f"{ti.id}|{tj.id}", ti.id, tj.id, None))
    ex = _encode_pairs(pairs, corpus, model.mode, store, graph)
    preds = predict_examples(model, ex) if ex else []
    _write_tsv(_artifact(config, "candidate_predictions.tsv"), header[:3] + header[4:],
               [[p.key, lp.t_i, lp.t_j, p.label.tag, *_prob_cells(p)] for lp, p in zip(pairs, preds)], st)


_ROW_ORDER = ("G", "C1", "C2", "PC", "MW", "filter", "filter+RF")


def stage_evaluate(config, force) -> None:
    hashes = {}
    for name, _ in UPSTREAM["evaluate"]:
        hashes[name] = read_stamp(_artifact(config, name))["config_hash"]
    if len(set(hashes.values())) > 1 and not force:
        raise HashMismatch(f"inputs come from different configurations: {hashes}")
    src = _sources(config)
    eval_src = set(src["eval_sources"])
    k, total = len(eval_src), src["total_articles"]
    relevant = relevant_article_pairs(_gold(config))
    filtered = [f.pair for f in read_features(_artifact(config, "filtered.tsv")) if f.a_i in eval_src]
    cands = [(r["a_i"], r["a_j"]) for r in _read_tsv(_artifact(config, "candidates.tsv"))]
    base = read_json_artifact(_artifact(config, "baselines.json"))
    rows = dict(base["candidates"])
    rows["filter"] = _candidate_row(filtered, relevant, k, total, eval_src)
    rows["filter+RF"] = _candidate_row(cands, relevant, k, total, eval_src)

    preds = _read_tsv(_artifact(config, "predictions.tsv"))
    report = prf_report([RelationLabel.parse(r["predicted"]) for r in preds],
                        [RelationLabel.parse(r["gold"]) for r in preds])
    report.delta = rows["filter+RF"]["delta"]
    report.micro_recall = rows["filter+RF"].get("micro_recall")
    report.candidate_macro_recall = rows["filter+RF"].get("macro_recall")
    report.k, report.total_articles = k, total
    greedy = rows["G"]["pairs"]
    payload = {
        "candidates": rows,
        "reduction_factor": greedy / max(1, rows["filter+RF"]["pairs"]),
        "alignment": report.to_json(),
        "alignment_mode": config.mode,
        "fusion": base.get("fusion"),
    }
    write_json_artifact(_artifact(config, "report.json"), payload, stamp(config, "evaluate"))
    text = [f"# {_stamp_line(stamp(config, 'evaluate'))}",
            f"candidate generation: k={k} source articles, |A|={total}", "",
            format_candidate_table({m: rows[m] for m in _ROW_ORDER if m in rows}), "",
            f"alignment ({config.mode}) on the held-out test split, n={int(report.confusion.sum())}", "",
            format_alignment_table({f"model+{config.mode}": report})]
    fusion = base.get("fusion")
    if fusion:
        t = fusion["test"]
        text += ["", f"schema-matching baseline (related vs none, tau={fusion['tau']:.3f})", "",
                 format_rows(["model", "P", "R", "F1"], [["fusion", t["precision"], t["recall"], t["f1"]]])]
    _artifact(config, "report.txt").write_text("\n".join(text) + "\n", encoding="utf-8")


_STAGE_FUNCS = {
    "synth": stage_synth,
    "normalize-graph": stage_normalize_graph,
    "featurize": stage_featurize,
    "filter": stage_filter,
    "train-candgen": stage_train_candgen,
    "classify-pairs": stage_classify_pairs,
    "baseline": stage_baseline,
    "train-align": stage_train_align,
    "predict": stage_predict,
    "evaluate": stage_evaluate,
}
