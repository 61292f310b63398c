"""Thread recommendation over a test window, baselines and MAP@N scoring.

A split cuts a corpus at ``T1``: the model is trained on threads started
before ``T1`` (and only their posts before ``T1``), then every learner gets
a ranking of those threads by the probability that they post in each during
``[T1, T2)``.  Threads started inside the test window are never ranked.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .forumdata import ForumCorpus, ReplyAnnotation, build_corpus, extract_reply_annotations
from .inference import CorpusArrays, PosteriorEstimate, SamplerConfig, _wsum, run_gibbs
from .ppcore import ModelParams, build_context, reply_rate_integral, thread_log_likelihood


@dataclass(frozen=True)
class SplitSpec:
    T1: float
    T2: float

    def validate(self, horizon: float | None = None) -> None:
        if not 0 < self.T1 < self.T2:
            raise ValueError(f"need 0 < T1 < T2, got T1={self.T1}, T2={self.T2}")
        if horizon is not None and self.T2 > horizon:
            raise ValueError(f"T2={self.T2} lies beyond the corpus horizon {horizon}")

    @property
    def window(self) -> float:
        return self.T2 - self.T1


@dataclass
class Split:
    """Training corpus plus the test-window targets ``R_u`` for every learner."""

    spec: SplitSpec
    train: ForumCorpus
    annotations: ReplyAnnotation
    relevant: dict  # learner -> set of thread ids posted in during [T1, T2)
    n_test_posts: int = 0

    @property
    def thread_ids(self) -> list:
        return [t.thread_id for t in self.train.threads]


def split_corpus(corpus: ForumCorpus, spec: SplitSpec) -> Split:
    spec.validate(corpus.horizon)
    kept = []
    relevant: dict = {}
    n_test = 0
    for t in corpus.threads:
        if t.start_time >= spec.T1:
            continue
        kept.append((t.thread_id, [p for p in t.posts if p.time < spec.T1]))
        for p in t.posts:
            if spec.T1 <= p.time < spec.T2 and p.learner is not None:
                relevant.setdefault(p.learner, set()).add(t.thread_id)
                n_test += 1
    train = build_corpus(
        kept,
        learners=corpus.learners,
        horizon=spec.T1,
        vocabulary=corpus.vocabulary,
        metadata={**corpus.metadata, "split": {"T1": spec.T1, "T2": spec.T2}},
    )
    return Split(spec, train, extract_reply_annotations(train), relevant, n_test)


# ------------------------------------------------------------ probabilities


def _check_estimate(estimate: PosteriorEstimate, split: Split) -> None:
    if list(estimate.learners) != list(split.train.learners):
        raise ValueError("estimate and split disagree on the learner list")
    if list(estimate.vocabulary) != list(split.train.vocabulary):
        raise ValueError("estimate and split disagree on the vocabulary")


def _normalize(lw: np.ndarray, static: np.ndarray) -> np.ndarray:
    """Row-normalize log weights; rows impossible under every topic fall back to
    ``static`` (prior and text only), then to uniform."""
    lw = np.where(np.isfinite(logsumexp(lw, axis=-1, keepdims=True)), lw, static)
    lw = np.where(np.isfinite(logsumexp(lw, axis=-1, keepdims=True)), lw, 0.0)
    return np.exp(lw - logsumexp(lw, axis=-1, keepdims=True))


def topic_posterior(estimate: PosteriorEstimate, split: Split, arrays: CorpusArrays | None = None) -> np.ndarray:
    """``P(z_r = k)`` for every training thread, shape (R, K).

    Combines the initiator's normalized thread-starting rates, the text
    likelihood under the estimated topic-word matrix and the likelihood of
    all training-window posting times.  A thread whose training posts are
    impossible under every topic (zero interest for one of its repliers)
    falls back to the first two factors.
    """
    _check_estimate(estimate, split)
    p = estimate.params
    d = arrays or CorpusArrays(split.train, split.annotations, p.gamma)
    K = p.K
    with np.errstate(divide="ignore"):
        log_phi = np.log(p.phi)
        log_a = np.log(p.a)
    lw = np.zeros((d.R, K))
    for r, bag in enumerate(d.bags):
        if bag.words.size:
            lw[r] += bag.counts @ log_phi[:, bag.words].T
    named = d.initiator >= 0
    mu_rows = p.mu[d.initiator[named]]
    tot = mu_rows.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        prior = np.where(tot > 0, np.log(mu_rows) - np.log(tot), -math.log(K))
    lw[named] += prior
    lw[~named] -= math.log(K)
    static = lw.copy()
    # temporal part: topic k uses grid slot k because the arrays were built on p.gamma
    lex = d.event_log_excitation(p.alpha, p.beta)  # (K, J)
    Xm = d.entry_exposure(p.alpha, p.beta)  # (K, E)
    for k in range(K):
        ll = _wsum(d.ev_thread, weights=lex[k] + log_a[d.ev_learner, k], minlength=d.R)
        corr = -p.a[d.ent_learner, k] * (Xm[k] - d.thread_exposure[d.ent_thread, k])
        ll += _wsum(d.ent_thread, weights=corr, minlength=d.R)
        ll -= p.a[:, k].sum() * d.thread_exposure[:, k]
        lw[:, k] += ll
    return _normalize(lw, static)


def posting_probabilities(estimate: PosteriorEstimate, split: Split) -> np.ndarray:
    """``P(u posts in r during [T1, T2))`` for every learner and training thread, shape (U, R)."""
    _check_estimate(estimate, split)
    p = estimate.params
    d = CorpusArrays(split.train, split.annotations, p.gamma)
    pz = topic_posterior(estimate, split, d)
    g = p.gamma
    # sources decayed to T1; learner-specific multipliers only matter for posters
    decay = np.exp(-g[None, :] * (split.spec.T1 - d.times[:, None]))  # (n_posts, K)
    base = np.stack([_wsum(d.post_thread, weights=decay[:, k], minlength=d.R)
                     for k in range(p.K)], axis=1)  # (R, K)
    scale = -np.expm1(-g * split.spec.window) / g  # (K,)
    integral = p.a[:, None, :] * (base * scale)[None, :, :]  # (U, R, K)
    mult = np.array([1.0, p.alpha, p.alpha * p.beta])
    for e in range(d.E):
        r = d.ent_thread[e]
        lo, hi = d.thread_post_start[r], d.thread_post_start[r + 1]
        m = mult[d.ent_cls[e]]
        weighted = m @ decay[lo:hi]
        integral[d.ent_learner[e], r] = p.a[d.ent_learner[e]] * weighted * scale
    return np.einsum("urk,rk->ur", -np.expm1(-integral), pz)


def posting_probability(learner: str, thread_id: str, estimate: PosteriorEstimate, split: Split) -> float:
    """Single-pair version of :func:`posting_probabilities` built on the rate primitives."""
    _check_estimate(estimate, split)
    p = estimate.params
    lidx = split.train.learner_index()
    if learner not in lidx:
        raise KeyError(f"unknown learner {learner!r}")
    thread = split.train.thread(thread_id)
    T1, T2 = split.spec.T1, split.spec.T2

    # topic posterior from first principles
    K = p.K
    lw = np.zeros(K)
    for w, c in thread.token_counts.items():
        wi = split.train.word_index()[w]
        lw += c * np.log(p.phi[:, wi])
    u1 = thread.initiator
    if u1 is None or p.mu[lidx[u1]].sum() == 0:
        lw -= math.log(K)
    else:
        with np.errstate(divide="ignore"):
            lw += np.log(p.mu[lidx[u1]] / p.mu[lidx[u1]].sum())
    static = lw.copy()
    for v, vi in lidx.items():
        ctx = build_context(thread, split.annotations, v, vi)
        for k in range(K):
            lw[k] += thread_log_likelihood(ctx, k, p, T1)
    pz = _normalize(lw, static)

    ctx = build_context(thread, split.annotations, learner, lidx[learner])
    out = 0.0
    for k in range(K):
        out += -math.expm1(-reply_rate_integral(ctx, k, T1, T2, p)) * pz[k]
    return float(out)


# ---------------------------------------------------------------- rankings


def order_threads(scores, thread_ids) -> list:
    """Thread ids by descending score, equal scores by ascending id."""
    scores = np.asarray(scores, dtype=float)
    ids = list(thread_ids)
    return [ids[i] for i in sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))]


def rank_threads(learner: str, estimate: PosteriorEstimate, split: Split,
                 probabilities: np.ndarray | None = None) -> list:
    """``(thread_id, probability)`` pairs for one learner, best first."""
    if not split.train.threads:
        raise ValueError("no training threads to rank")
    probs = posting_probabilities(estimate, split) if probabilities is None else probabilities
    row = probs[split.train.learner_index()[learner]]
    order = order_threads(row, split.thread_ids)
    pos = {t: i for i, t in enumerate(split.thread_ids)}
    return [(t, float(row[pos[t]])) for t in order]


def rank_all(estimate: PosteriorEstimate, split: Split) -> dict:
    """Rankings for every learner: ``learner -> [(thread_id, probability), ...]``."""
    probs = posting_probabilities(estimate, split)
    return {u: rank_threads(u, estimate, split, probs) for u in split.train.learners}


def baseline_popularity(split: Split) -> list:
    """Training threads by number of training-window posts, most first."""
    counts = [len(t.posts) for t in split.train.threads]
    return order_threads(counts, split.thread_ids)


def baseline_recency(split: Split) -> list:
    """Training threads by their latest training-window post, newest first."""
    latest = [t.posts[-1].time for t in split.train.threads]
    return order_threads(latest, split.thread_ids)


# --------------------------------------------------------------- evaluation


def average_precision(ranking, relevant, N: int) -> float:
    """``sum_{n<=N} P@n * hit(n) / min(|relevant|, N)``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if not relevant:
        raise ValueError("average precision needs at least one relevant item")
    hits = 0
    total = 0.0
    for n, item in enumerate(list(ranking)[:N], start=1):
        if item in relevant:
            hits += 1
            total += hits / n
    return total / min(len(relevant), N)


def map_at_n(rankings, test_posts, N: int) -> float | None:
    """Mean average precision at ``N`` over learners with test-window posts.

    ``rankings`` maps each learner to a list of thread ids (or a single list
    shared by everyone, as the baselines produce).  Returns ``None`` when no
    learner posted in the test window.
    """
    qualifying = sorted(u for u, rel in test_posts.items() if rel)
    if not qualifying:
        return None
    shared = not isinstance(rankings, dict)
    aps = []
    for u in qualifying:
        ranking = rankings if shared else rankings.get(u, [])
        ranking = [x[0] if isinstance(x, tuple) else x for x in ranking]
        aps.append(average_precision(ranking, test_posts[u], N))
    return float(np.mean(aps))


def write_rankings_csv(rankings: dict, path, top: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["learner_id", "rank", "thread_id", "probability"])
        for u in sorted(rankings):
            for i, (t, prob) in enumerate(rankings[u][:top], start=1):
                w.writerow([u, i, t, repr(prob)])


# -------------------------------------------------------------- experiments


@dataclass
class ExperimentConfig:
    """Grid of training cutoffs, test-window lengths, topic counts and cutoffs N."""

    T1: tuple = (30.0,)
    window: tuple = (7.0,)
    K: tuple = (5,)
    N: tuple = (5,)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    baselines: bool = True


SUMMARY_COLUMNS = ["method", "T1", "window", "K", "N", "MAP"]


def evaluate_split(corpus: ForumCorpus, spec: SplitSpec, sampler: SamplerConfig, Ns=(5,),
                   baselines: bool = True, split: Split | None = None) -> list:
    """Train on one split and score the model (and baselines) at every N.

    Returns summary rows; ``MAP`` is ``None`` when the cell has no test posts.
    """
    split = split or split_corpus(corpus, spec)
    rows = []
    common = {"T1": spec.T1, "window": spec.window}
    empty = not split.relevant or not split.train.threads
    if empty:
        model_maps = {N: None for N in Ns}
    else:
        est = run_gibbs(split.train, split.annotations, sampler)
        ranks = rank_all(est, split)
        model_maps = {N: map_at_n(ranks, split.relevant, N) for N in Ns}
    for N in Ns:
        rows.append({"method": "model", **common, "K": sampler.K, "N": N, "MAP": model_maps[N]})
    if baselines:
        for name, fn in (("PPL", baseline_popularity), ("REC", baseline_recency)):
            ranking = fn(split) if split.train.threads else []
            for N in Ns:
                rows.append({"method": name, **common, "K": None, "N": N,
                             "MAP": None if empty else map_at_n(ranking, split.relevant, N)})
    return rows


def sweep_experiment(corpus: ForumCorpus, config: ExperimentConfig, jobs: int = 1) -> list:
    """Evaluate every (T1, window, K) cell; baselines are reported once per (T1, window)."""
    need = max(config.T1) + max(config.window)
    if need > corpus.horizon:
        raise ValueError(f"grid needs {need} days but the corpus spans {corpus.horizon}")
    cells = []
    for T1 in config.T1:
        for dt in config.window:
            for i, K in enumerate(config.K):
                cells.append((SplitSpec(T1, T1 + dt), replace(config.sampler, K=K),
                              config.baselines and i == 0))
    args = [(corpus, spec, sc, tuple(config.N), bl) for spec, sc, bl in cells]
    if jobs > 1 and len(args) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_cell, args))
    else:
        results = [_evaluate_cell(a) for a in args]
    return [row for rows in results for row in rows]


def _evaluate_cell(args) -> list:
    corpus, spec, sampler, Ns, baselines = args
    return evaluate_split(corpus, spec, sampler, Ns, baselines)


def write_summary_csv(rows: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float) else row[c])
                        for c in SUMMARY_COLUMNS])
