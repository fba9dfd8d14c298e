"""
Candidate article pairs on a small synthetic corpus
====================================================

Every ordered pair of table-bearing articles is a candidate at first. We
featurize the pairs, keep those above the mean on a few features, then let a
random forest decide which of the survivors are worth aligning.

    python demos/candidate_generation.py
"""
import numpy as np

from tablenet.baselines import AnchorGraph, pairs_milne_witten, pairs_same_parent_category
from tablenet.candgen import (
    FeatureContext, classify_pairs, compute_thresholds, default_forest_params, featurize_pairs,
    filter_pairs, relevance_scores, train_relevance_model,
)
from tablenet.catgraph import normalize
from tablenet.colsem import KbStore
from tablenet.embed import EmbeddingStore
from tablenet.evaluation import delta, pair_recall
from tablenet.pipeline import split_sources
from tablenet.synth import SynthSpec, generate_synthetic_corpus

# a corpus of 60 articles with three tables each and planted relations
data = generate_synthetic_corpus(SynthSpec(num_articles=60, seed=7))
corpus = data.corpus
graph = normalize(data.edges, data.associations, data.root_id)
store = EmbeddingStore(data.word_vecs, data.node_vecs)
kb = KbStore(data.triples, data.types)
relevant = data.relevant_article_pairs()

articles = corpus.table_articles()
print(f"{len(articles)} articles, {len(data.tables)} tables, {len(data.gold)} planted table relations")

# greedy universe: every other article for every source
pairs = [(a, b) for a in sorted(articles) for b in articles if b != a]
ctx = FeatureContext(corpus, graph, store, kb)
feats = featurize_pairs(pairs, ctx, {p: int(p in relevant) for p in pairs})

# features of one related and one unrelated pair
rel = next(f for f in feats if f.label == 1)
unrel = next(f for f in feats if f.label == 0)
for name in ("f1", "f2", "f4", "f5", "f8_l", "f9"):
    print(f"  {name:5s} related={rel[name]:.3f}  unrelated={unrel[name]:.3f}")

# mean-threshold filtering keeps pairs above the mean on every chosen feature
th = compute_thresholds(feats)
kept = filter_pairs(feats, th, ["f1", "f2", "f4", "f5"])
print(f"filter keeps {len(kept)} of {len(feats)} pairs")

# train on 60% of the source articles, evaluate on the rest
train_src, eval_src = split_sources(articles, 0.6, seed=0)
train_feats = [f for f in kept if f.a_i in set(train_src)]
model = train_relevance_model(train_feats, default_forest_params(len(train_feats), seed=0))
eval_feats = [f for f in kept if f.a_i in set(eval_src)]
scores = relevance_scores(model, eval_feats)
print("relevance score quartiles:", np.round(np.quantile(scores, [0.25, 0.5, 0.75]), 3))

eval_relevant = [p for p in relevant if p[0] in set(eval_src)]
k, total = len(eval_src), len(articles)


def show(name, retained):
    r = pair_recall(retained, eval_relevant)
    print(f"{name:10s} pairs={len(retained):5d}  delta={delta(len(retained), k, total):.3f}  "
          f"R_micro={r.micro:.3f}  R={r.macro:.3f}")


show("greedy", [p for p in pairs if p[0] in set(eval_src)])
show("PC", pairs_same_parent_category(eval_src, corpus, graph))
show("MW", pairs_milne_witten(eval_src, corpus, AnchorGraph.from_corpus(corpus))[0])
show("filter", [f.pair for f in eval_feats])
# raising tau trades recall for fewer pairs
for tau in (0.3, 0.5, 0.7):
    show(f"RF tau={tau}", [f.pair for f in classify_pairs(model, eval_feats, tau)])
