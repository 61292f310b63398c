"""Simulate a desk-scale forum, fit the sampler and compare with the planted values.

Run with ``python3 demos/simulate_and_recover.py [seed]``.  Takes about 15 s.
"""

import sys
import time

import numpy as np
from scipy.optimize import linear_sum_assignment

from forumhawkes.inference import HOUR, SamplerConfig, run_gibbs
from forumhawkes.simulator import SimConfig, planted_params, simulate_corpus

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
rng = np.random.default_rng(seed)

# 200 learners, three topics whose posts fade over hours, a day and a week
params = planted_params(200, 3, 150, [4 * HOUR, 1.0, 7.0], 1.5, 2.0, rng, threads_per_day=500 / 60,
                        active_fraction=0.2, passive_interest=0.005, branching=0.95)
corpus, truth = simulate_corpus(SimConfig(params, 60.0, tokens_per_post=12, reply_probability=0.9, seed=seed))
print(f"{len(corpus.threads)} threads, {corpus.n_posts} posts, {len(corpus.learners)} learners")

start = time.perf_counter()
est = run_gibbs(corpus, config=SamplerConfig(K=3, seed=seed))
print(f"200 sweeps in {time.perf_counter() - start:.1f}s")

# topic labels are arbitrary; match them on the thread assignments
true_z = np.array([truth["topics"][t] for t in est.thread_ids])
conf = np.zeros((3, 3))
np.add.at(conf, (true_z, est.z_mode), 1)
rows, cols = linear_sum_assignment(-conf)
print(f"thread topics recovered: {conf[rows, cols].sum() / len(true_z):.1%}")

print("\nhalf-lives (days)     planted   estimated")
for k, j in zip(rows, cols):
    print(f"  topic {k}            {np.log(2) / params.gamma[k]:8.3f}  {np.log(2) / est.params.gamma[j]:8.3f}")
print(f"\nalpha  planted 1.50  estimated {est.params.alpha:.2f}")
print(f"beta   planted 2.00  estimated {est.params.beta:.2f}")
