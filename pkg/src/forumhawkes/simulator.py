"""Synthetic forums drawn from known parameters.

Thread births are homogeneous Poisson processes per (learner, topic).  Replies
are generated as a branching cascade: posts are processed in time order, and
each processed post spawns, for every learner, a Poisson number of offspring
with exponentially decaying intensity.  Because a post's excitation class
for a learner only depends on posts that precede it, processing in time order
makes the cascade an exact draw from the model.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .forumdata import Post, build_corpus
from .ppcore import ExcitationClass, ModelParams, class_multipliers


class SupercriticalError(ValueError):
    """Raised when cascades could grow without bound."""


def make_vocabulary(V: int) -> list:
    """``V`` distinct letter-only pseudo-words, stable across calls."""
    cons = "bdfgklmnprstvz"
    vows = "aeiou"
    syll = [c + v for c in cons for v in vows]
    words = []
    for n in itertools.count(2):
        for combo in itertools.product(syll, repeat=n):
            words.append("".join(combo))
            if len(words) == V:
                return words


@dataclass
class SimConfig:
    params: ModelParams
    horizon: float
    tokens_per_post: float = 10.0
    reply_probability: float = 0.5
    seed: int = 0
    vocabulary: list = field(default_factory=list)
    learners: list = field(default_factory=list)

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not 0 <= self.reply_probability <= 1:
            raise ValueError("reply_probability must lie in [0, 1]")
        if self.tokens_per_post < 0:
            raise ValueError("tokens_per_post must be nonnegative")
        U, V = self.params.U, self.V
        if not self.learners:
            self.learners = [f"u{i:03d}" for i in range(U)]
        if not self.vocabulary and self.params.phi is not None:
            self.vocabulary = make_vocabulary(V)
        if len(self.learners) != U:
            raise ValueError("need one learner name per row of a")

    @property
    def U(self) -> int:
        return self.params.U

    @property
    def K(self) -> int:
        return self.params.K

    @property
    def V(self) -> int:
        return 0 if self.params.phi is None else self.params.phi.shape[1]


def branching_ratios(params: ModelParams, max_recipients: int = 1) -> np.ndarray:
    """Per-topic upper bound on the expected number of offspring of any post.

    A post excites each learner by at most ``max(1, alpha)`` times their base
    interest, except its explicit recipients who get ``alpha * beta``.  With
    at most ``max_recipients`` recipients per post the bound is
    ``max(1, alpha) * sum_u a/gamma + excess * (top max_recipients of a/gamma)``.
    """
    base = max(1.0, params.alpha)
    excess = max(0.0, params.alpha * params.beta - base)
    load = params.a / params.gamma[None, :]
    top = np.sort(load, axis=0)[::-1][:max_recipients].sum(axis=0)
    return base * load.sum(axis=0) + excess * top


def check_subcritical(params: ModelParams, max_recipients: int = 1) -> None:
    ratios = branching_ratios(params, max_recipients)
    bad = np.flatnonzero(ratios >= 1)
    if bad.size:
        raise SupercriticalError(
            f"supercritical parameters: branching ratio {ratios[bad[0]]:.3f} >= 1 for topic {bad[0]}"
        )


def simulate_thread_births(config: SimConfig, rng=None) -> list:
    """Thread births as ``(time, initiator index, topic)`` sorted by time."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    mu = config.params.mu
    counts = rng.poisson(mu * config.horizon)
    births = []
    for u, k in zip(*np.nonzero(counts)):
        for t in rng.uniform(0.0, config.horizon, size=counts[u, k]):
            births.append((float(t), int(u), int(k)))
    births.sort()
    return births


def simulate_text(k: int, params: ModelParams, config: SimConfig, rng) -> np.ndarray:
    """Word indices of one post on topic ``k``."""
    n = rng.poisson(config.tokens_per_post) if config.tokens_per_post > 0 else 0
    if n == 0:
        return np.empty(0, dtype=np.int64)
    return rng.choice(params.phi.shape[1], size=n, p=params.phi[k])


@dataclass
class SimPost:
    time: float
    learner: int
    comment_of: int | None = None  # explicit reply: nested under and mentioning this post's author
    parent: int | None = None  # index of the post whose excitation caused this one
    recipients: frozenset = frozenset()


def simulate_replies(t0: float, initiator: int, k: int, config: SimConfig, rng) -> list:
    """One thread's cascade, chronologically ordered, starting from its initial post."""
    p = config.params
    U, g, T = config.U, p.gamma[k], config.horizon
    a_k = p.a[:, k]
    mult = class_multipliers(p.alpha, p.beta)
    posted = np.zeros(U, dtype=bool)
    heap = [(t0, 0, SimPost(t0, initiator))]
    counter = itertools.count(1)
    out = []
    while heap:
        t, _, post = heapq.heappop(heap)
        idx = len(out)
        if post.comment_of is not None:
            author = out[post.comment_of].learner
            if author != post.learner:
                post.recipients = frozenset([author])
        out.append(post)
        posted[post.learner] = True
        cls = np.where(posted, ExcitationClass.POST_FIRST_POST, ExcitationClass.PRE_FIRST_POST)
        for v in post.recipients:
            cls[v] = ExcitationClass.EXPLICIT_REPLY
        mass = -math.expm1(-g * (T - t))
        n_off = rng.poisson(mult[cls] * a_k * mass / g)
        for v in np.flatnonzero(n_off):
            for _ in range(n_off[v]):
                lag = -math.log1p(-rng.random() * mass) / g
                child_t = t + lag
                if child_t <= t:
                    child_t = math.nextafter(t, math.inf)
                if child_t >= T:
                    continue
                child = SimPost(child_t, int(v), parent=idx)
                if rng.random() < config.reply_probability:
                    child.comment_of = idx
                heapq.heappush(heap, (child_t, next(counter), child))
    return out


def simulate_corpus(config: SimConfig, rng=None):
    """Draw a full forum.  Returns ``(corpus, truth)`` where ``truth`` holds the
    planted parameters, thread topics and each post's causing parent."""
    check_subcritical(config.params)
    if config.params.phi is None:
        raise ValueError("simulating text needs phi")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    births = simulate_thread_births(config, rng)
    vocab = config.vocabulary
    threads = []
    topics = {}
    parents = {}
    for n, (t0, u, k) in enumerate(births):
        tid = f"r{n:05d}"
        cascade = simulate_replies(t0, u, k, config, rng)
        posts = []
        for i, sp in enumerate(cascade):
            words = simulate_text(k, config.params, config, rng)
            pid = f"{tid}-{i:04d}"
            posts.append(Post(
                post_id=pid,
                thread_id=tid,
                learner=config.learners[sp.learner],
                time=sp.time,
                text=" ".join(vocab[w] for w in words),
                parent_post_id=None if sp.comment_of is None else f"{tid}-{sp.comment_of:04d}",
                mentions=frozenset(config.learners[v] for v in sp.recipients),
                tokens=tuple(vocab[w] for w in words),
            ))
            if sp.parent is not None:
                parents[pid] = f"{tid}-{sp.parent:04d}"
        threads.append((tid, posts))
        topics[tid] = k
    corpus = build_corpus(
        threads,
        learners=config.learners,
        horizon=config.horizon,
        vocabulary=vocab,
        metadata={"seed": config.seed, "source": "simulated"},
    )
    truth = {
        "seed": config.seed,
        "params": config.params.to_dict(),
        "half_lives": config.params.half_lives.tolist(),
        "topics": topics,
        "parents": parents,
    }
    return corpus, truth


def write_truth(truth: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(truth, fh)


def planted_params(
    U: int,
    K: int,
    V: int,
    half_lives,
    alpha: float,
    beta: float,
    rng,
    threads_per_day: float = 8.0,
    branching: float = 0.9,
    active_fraction: float = 0.15,
    passive_interest: float = 0.05,
    off_topic_interest: float = 0.02,
    topic_word_mass: float = 0.95,
) -> ModelParams:
    """Structured ground truth for experiments.

    Every learner has a home topic.  A fraction of learners are active
    responders whose interest is concentrated on their home topic; the rest
    mostly start threads.  Interests are scaled so that the per-topic
    branching bound equals ``branching``.  Each topic puts
    ``topic_word_mass`` of its word mass on its own block of the vocabulary.
    """
    gamma = math.log(2) / np.asarray(half_lives, dtype=float)
    if len(gamma) != K:
        raise ValueError("need one half-life per topic")
    home = np.arange(U) % K
    rng.shuffle(home)
    onehot = np.eye(K)[home]
    mu_w = rng.lognormal(0.0, 0.5, size=U)[:, None] * (onehot + 0.1 * (1 - onehot))
    mu = mu_w / mu_w.sum() * threads_per_day

    active = rng.random(U) < active_fraction
    a_w = rng.lognormal(0.0, 0.5, size=U)[:, None] * (onehot + off_topic_interest * (1 - onehot))
    a_w *= np.where(active, 1.0, passive_interest)[:, None]
    a = a_w * gamma[None, :]
    probe = ModelParams(gamma=gamma, a=a, mu=mu, alpha=alpha, beta=beta)
    a = a * (branching / branching_ratios(probe))[None, :]

    phi = np.full((K, V), (1 - topic_word_mass) / V)
    blocks = np.array_split(np.arange(V), K)
    for k, b in enumerate(blocks):
        phi[k, b] += topic_word_mass / len(b)
    phi /= phi.sum(axis=1, keepdims=True)
    return ModelParams(gamma=gamma, a=a, mu=mu, alpha=alpha, beta=beta, phi=phi)
