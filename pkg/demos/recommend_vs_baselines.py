"""Train on the first 45 days of a simulated forum and rank threads for days 45 to 52.

Compares MAP@5 of the model with popularity and recency orderings.  Run
with ``python3 demos/recommend_vs_baselines.py [seed]``.
"""

import sys

import numpy as np

from forumhawkes.inference import HOUR, SamplerConfig, run_gibbs
from forumhawkes.recommend import (
    SplitSpec,
    baseline_popularity,
    baseline_recency,
    map_at_n,
    rank_all,
    split_corpus,
)
from forumhawkes.simulator import SimConfig, planted_params, simulate_corpus

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 100
rng = np.random.default_rng(seed)
params = planted_params(200, 3, 150, [4 * HOUR, 1.0, 7.0], 1.5, 2.0, rng, threads_per_day=500 / 60,
                        active_fraction=0.2, passive_interest=0.005, branching=0.95)
corpus, _ = simulate_corpus(SimConfig(params, 60.0, tokens_per_post=12, reply_probability=0.9, seed=seed))

split = split_corpus(corpus, SplitSpec(45.0, 52.0))
active = sum(1 for rel in split.relevant.values() if rel)
print(f"{len(split.thread_ids)} candidate threads, {split.n_test_posts} test posts from {active} learners")

est = run_gibbs(split.train, split.annotations, SamplerConfig(K=3, seed=seed))
rankings = rank_all(est, split)

# one learner's list, with the model's posting probabilities
u = max(split.relevant, key=lambda v: len(split.relevant[v]))
print(f"\ntop 5 for {u} (posted in {sorted(split.relevant[u])}):")
for thread_id, prob in rankings[u][:5]:
    mark = "*" if thread_id in split.relevant[u] else " "
    print(f"  {mark} {thread_id:>8}  {prob:.3f}")

print()
for name, ranks in [("model", rankings), ("popularity", baseline_popularity(split)),
                    ("recency", baseline_recency(split))]:
    print(f"MAP@5 {name:<11} {map_at_n(ranks, split.relevant, 5):.3f}")
