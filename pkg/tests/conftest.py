import numpy as np
import pytest

from forumhawkes.forumdata import Post, build_corpus
from forumhawkes.inference import HOUR
from forumhawkes.simulator import SimConfig, planted_params, simulate_corpus

# Acceptance results collected by tests/test_acceptance.py, printed at the end of the run.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def post(pid, learner, time, text="", parent=None, mentions=(), thread="t1"):
    return Post(pid, thread, learner, time, text, parent, frozenset(mentions))


@pytest.fixture
def tiny_corpus():
    """Two threads, three learners, one anonymous post and every reply mechanism."""
    t1 = [
        post("p1", "ann", 0.5, "gradient descent question"),
        post("p2", "bob", 0.75, "try smaller step", parent="p1"),
        post("p3", None, 1.0, "same problem here"),
        post("p4", "ann", 1.25, "thanks @bob that worked", mentions=["bob"]),
        post("p5", "cat", 2.0, "late to this gradient thread", parent="p1"),
    ]
    t2 = [
        post("q1", "bob", 3.0, "lecture video broken", thread="t2"),
        post("q2", "cat", 3.5, "works for me", parent="q1", thread="t2"),
    ]
    return build_corpus({"t1": t1, "t2": t2}, learners=["ann", "bob", "cat", "dan"], horizon=5.0)


def small_sim(seed=0, U=30, K=2, V=40, horizon=20.0, threads_per_day=3.0, alpha=1.5, beta=2.0,
              tokens_per_post=8, reply_probability=0.7, half_lives=None):
    rng = np.random.default_rng(seed)
    half_lives = half_lives or [6 * HOUR, 2.0][:K]
    p = planted_params(U, K, V, half_lives, alpha, beta, rng, threads_per_day=threads_per_day,
                       active_fraction=0.4, passive_interest=0.05, branching=0.8)
    return simulate_corpus(SimConfig(p, horizon, tokens_per_post=tokens_per_post,
                                     reply_probability=reply_probability, seed=seed))


@pytest.fixture
def sim_corpus():
    corpus, truth = small_sim()
    return corpus, truth
