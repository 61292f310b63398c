"""Gibbs sampler for thread topics, decay rates, interests, background rates
and the notification multipliers ``alpha`` and ``beta``.

Gamma distributions use the shape-rate convention throughout.

Each sweep updates, in order: parent assignments, interests ``a``,
``alpha``, ``beta``, background rates ``mu``, topic decay rates (on a fixed
grid) and thread topics.  Thread topics are drawn one thread at a time with
the text model collapsed.  By default (``collapse_rates=True``) the topic
update also integrates ``a`` and ``mu`` out against their Gamma priors; with
the default tiny prior shapes the uncollapsed update gives zero weight to
any topic a thread's participants have not yet been seen on, which freezes
most threads at their initial topic.  The same option draws each decay
rate with ``a`` integrated out and then redraws ``a`` given the new rate,
since interests and decay rates are strongly coupled.  Set
``collapse_rates=False`` for the plain conditional updates.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln

from .forumdata import ForumCorpus, ReplyAnnotation, extract_reply_annotations
from .ppcore import NEG_INF, ModelParams, class_multipliers, source_classes
from .topicmodel import Bag, TopicWordState, estimate_phi, text_log_likelihoods

log = logging.getLogger(__name__)

MINUTE = 1.0 / 1440.0
HOUR = 1.0 / 24.0
DEFAULT_HALF_LIVES = (10 * MINUTE, HOUR, 4 * HOUR, 1.0, 3.0, 7.0, 14.0)

CHECKPOINT_VERSION = 1


def _wsum(index, weights, minlength: int) -> np.ndarray:
    """Weighted bincount that stays floating point when ``index`` is empty."""
    return np.bincount(index, weights=weights, minlength=minlength).astype(float, copy=False)


class SamplerError(RuntimeError):
    """Raised when every candidate value of a variable has zero posterior weight."""


@dataclass
class SamplerConfig:
    K: int = 5
    iterations: int = 200
    burn_in: int = 100
    half_lives: tuple = DEFAULT_HALF_LIVES  # days
    a_shape: float = 1e-4
    a_rate: float = 1.0
    mu_shape: float = 1e-4
    mu_rate: float = 1.0
    alpha_shape: float = 1.0
    alpha_rate: float = 1.0
    beta_shape: float = 1.0
    beta_rate: float = 1.0
    eta: float = 0.01
    seed: int = 0
    collapse_rates: bool = True
    narrow_parents: bool = False

    def __post_init__(self):
        self.half_lives = tuple(float(h) for h in self.half_lives)
        self.validate()

    @property
    def decay_grid(self) -> np.ndarray:
        return math.log(2) / np.asarray(self.half_lives)

    def validate(self) -> None:
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if not self.half_lives or min(self.half_lives) <= 0:
            raise ValueError("decay grid must be nonempty and positive")
        hyper = (self.a_shape, self.a_rate, self.mu_shape, self.mu_rate,
                 self.alpha_shape, self.alpha_rate, self.beta_shape, self.beta_rate, self.eta)
        if min(hyper) <= 0:
            raise ValueError("hyperparameters must be positive")


class CorpusArrays:
    """Flat integer-indexed view of a corpus, with per-decay-rate caches.

    Terminology: a *source* is any post; an *entry* is a (thread, learner)
    pair for a non-anonymous learner who posted in the thread; an *event* is
    a non-initial post by a non-anonymous learner; a *pair* is an (event,
    earlier post) candidate parent link.
    """

    def __init__(self, corpus: ForumCorpus, annotations: ReplyAnnotation, grid,
                 horizon: float | None = None, narrow_parents: bool = False):
        self.grid = np.asarray(grid, dtype=float)
        self.horizon = float(corpus.horizon if horizon is None else horizon)
        self.U = len(corpus.learners)
        self.R = len(corpus.threads)
        self.V = len(corpus.vocabulary)
        self.thread_ids = [t.thread_id for t in corpus.threads]
        lidx = corpus.learner_index()
        widx = corpus.word_index()

        times, post_thread = [], []
        thread_post_start = []
        initiator = []
        ent_thread, ent_learner, ent_nev, ent_cls = [], [], [], []
        ev_thread, ev_entry, ev_learner, ev_post = [], [], [], []
        pair_event, pair_src, pair_cls, pair_lag = [], [], [], []
        self.bags = []
        for r, t in enumerate(corpus.threads):
            base = len(times)
            thread_post_start.append(base)
            ts = [p.time for p in t.posts]
            if ts[-1] > self.horizon:
                raise ValueError(f"thread {t.thread_id} has posts beyond the horizon")
            times.extend(ts)
            post_thread.extend([r] * len(ts))
            u0 = t.posts[0].learner
            initiator.append(-1 if u0 is None else lidx[u0])
            self.bags.append(Bag.from_counts(t.token_counts, widx))

            narrowed = {}
            if narrow_parents:
                pos = {p.post_id: i for i, p in enumerate(t.posts)}
                first_comment = {}
                for i, p in enumerate(t.posts):
                    if p.parent_post_id is not None:
                        first_comment.setdefault(p.parent_post_id, i)
                for parent, i in first_comment.items():
                    author = t.posts[pos[parent]].learner
                    if author is not None and author in annotations.recipients.get(t.posts[i].post_id, ()):
                        narrowed[i] = pos[parent]

            posters = []
            for p in t.posts:
                if p.learner is not None and p.learner not in posters:
                    posters.append(p.learner)
            entry_of = {}
            for u in posters:
                entry_of[u] = len(ent_thread)
                ent_thread.append(r)
                ent_learner.append(lidx[u])
                ent_cls.append(source_classes(t, annotations, u))
                ent_nev.append(0)
            for i, p in enumerate(t.posts):
                if i == 0 or p.learner is None:
                    continue
                e = entry_of[p.learner]
                ent_nev[e] += 1
                j = len(ev_thread)
                ev_thread.append(r)
                ev_entry.append(e)
                ev_learner.append(lidx[p.learner])
                ev_post.append(base + i)
                cls = ent_cls[e]
                cands = [narrowed[i]] if i in narrowed else range(i)
                for q in cands:
                    pair_event.append(j)
                    pair_src.append(base + q)
                    pair_cls.append(cls[q])
                    pair_lag.append(0.0 if i in narrowed else ts[i - 1] - ts[q])

        self.times = np.asarray(times, dtype=float)
        self.post_thread = np.asarray(post_thread, dtype=np.int64)
        self.thread_post_start = np.asarray(thread_post_start + [len(times)], dtype=np.int64)
        self.initiator = np.asarray(initiator, dtype=np.int64)
        self.ent_thread = np.asarray(ent_thread, dtype=np.int64)
        self.ent_learner = np.asarray(ent_learner, dtype=np.int64)
        self.ent_nev = np.asarray(ent_nev, dtype=np.int64)
        self.ent_cls = ent_cls
        self.ev_thread = np.asarray(ev_thread, dtype=np.int64)
        self.ev_entry = np.asarray(ev_entry, dtype=np.int64)
        self.ev_learner = np.asarray(ev_learner, dtype=np.int64)
        self.ev_post = np.asarray(ev_post, dtype=np.int64)
        self.pair_event = np.asarray(pair_event, dtype=np.int64)
        self.pair_src = np.asarray(pair_src, dtype=np.int64)
        self.pair_cls = np.asarray(pair_cls, dtype=np.int64)
        pair_lag = np.asarray(pair_lag, dtype=float)
        self.E = len(self.ent_thread)
        self.J = len(self.ev_thread)
        self.P = len(self.pair_event)
        self.pair_start = np.searchsorted(self.pair_event, np.arange(self.J))
        self.pair_end = np.searchsorted(self.pair_event, np.arange(self.J), side="right")
        self.ent_slices = np.searchsorted(self.ent_thread, np.arange(self.R + 1))
        self.ev_slices = np.searchsorted(self.ev_thread, np.arange(self.R + 1))

        S = len(self.grid)
        g = self.grid[:, None]
        # exposure of every source over [t_p, horizon], divided by the decay rate
        expo = -np.expm1(-g * (self.horizon - self.times)[None, :]) / g  # (S, n_posts)
        self.thread_exposure = np.stack(
            [_wsum(self.post_thread, weights=expo[s], minlength=self.R) for s in range(S)],
            axis=1,
        )  # (R, S)
        self.ent_X = np.zeros((S, self.E, 3))
        for e in range(self.E):
            lo, hi = self.thread_post_start[self.ent_thread[e]], self.thread_post_start[self.ent_thread[e] + 1]
            cls = self.ent_cls[e]
            for c in range(3):
                mask = cls == c
                if mask.any():
                    self.ent_X[:, e, c] = expo[:, lo:hi][:, mask].sum(axis=1)
        prev_time = self.times[np.maximum(self.ev_post - 1, 0)]
        self.ev_shift = g * (self.times[self.ev_post] - prev_time)[None, :]  # (S, J)
        self.pair_decay = np.exp(-g * pair_lag[None, :])  # (S, P)
        self.ev_St = np.zeros((S, self.J, 3))
        flat = self.pair_event * 3 + self.pair_cls
        for s in range(S):
            self.ev_St[s] = _wsum(flat, weights=self.pair_decay[s], minlength=3 * self.J).reshape(self.J, 3)

    def entry_exposure(self, alpha: float, beta: float) -> np.ndarray:
        """Multiplier-weighted exposure of every entry, shape (S, E)."""
        return self.ent_X @ class_multipliers(alpha, beta)

    def event_log_excitation(self, alpha: float, beta: float) -> np.ndarray:
        """``log sum_p m_p exp(-gamma (t_j - t_p))`` per grid value and event, shape (S, J)."""
        with np.errstate(divide="ignore"):
            return np.log(self.ev_St @ class_multipliers(alpha, beta)) - self.ev_shift

    def thread_event_terms(self, alpha: float, beta: float) -> np.ndarray:
        """Per-thread sum of :meth:`event_log_excitation`, shape (S, R)."""
        lex = self.event_log_excitation(alpha, beta)
        return np.stack([_wsum(self.ev_thread, weights=lex[s], minlength=self.R)
                         for s in range(len(self.grid))])


@dataclass
class PosteriorEstimate:
    params: ModelParams
    z_mode: np.ndarray
    z_freq: np.ndarray
    thread_ids: list
    learners: list
    vocabulary: list
    horizon: float
    n_samples: int
    trace: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.params.K

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "z_mode": self.z_mode.tolist(),
            "z_freq": self.z_freq.tolist(),
            "thread_ids": list(self.thread_ids),
            "learners": list(self.learners),
            "vocabulary": list(self.vocabulary),
            "horizon": self.horizon,
            "n_samples": self.n_samples,
            "trace": {k: np.asarray(v).tolist() for k, v in self.trace.items()},
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorEstimate":
        return cls(
            params=ModelParams.from_dict(d["params"]),
            z_mode=np.asarray(d["z_mode"], dtype=np.int64),
            z_freq=np.asarray(d["z_freq"], dtype=float),
            thread_ids=d["thread_ids"],
            learners=d["learners"],
            vocabulary=d["vocabulary"],
            horizon=d["horizon"],
            n_samples=d["n_samples"],
            trace={k: np.asarray(v) for k, v in d["trace"].items()},
            config=d.get("config", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "PosteriorEstimate":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _categorical(rng, logw: np.ndarray, what: str) -> int:
    top = logw.max()
    if top == NEG_INF or np.isnan(top):
        raise SamplerError(f"all candidate values of {what} have zero posterior weight")
    w = np.exp(logw - top)
    return int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))


class GibbsSampler:
    """One Markov chain over all latent variables of a corpus."""

    def __init__(self, corpus: ForumCorpus, config: SamplerConfig,
                 annotations: ReplyAnnotation | None = None):
        if not corpus.threads:
            raise ValueError("corpus has no threads")
        self.corpus = corpus
        self.config = config
        self.annotations = annotations or extract_reply_annotations(corpus)
        self.data = CorpusArrays(corpus, self.annotations, config.decay_grid,
                                 narrow_parents=config.narrow_parents)
        self.K = config.K
        self.S = len(config.decay_grid)
        self.T = self.data.horizon
        self.rng = np.random.default_rng(config.seed)
        self.iteration = 0
        self._init_state()
        self._reset_accumulators()

    # ------------------------------------------------------------------ state

    def _init_state(self) -> None:
        c, d, rng, K = self.config, self.data, self.rng, self.K
        self.g = rng.integers(self.S, size=K)
        self.z = rng.integers(K, size=d.R)
        self.a = rng.gamma(c.a_shape, 1.0 / c.a_rate, size=(d.U, K))
        self.mu = rng.gamma(c.mu_shape, 1.0 / c.mu_rate, size=(d.U, K))
        self.alpha = float(rng.gamma(c.alpha_shape, 1.0 / c.alpha_rate))
        self.beta = float(rng.gamma(c.beta_shape, 1.0 / c.beta_rate))
        self.parent = d.pair_start.copy()
        self._rebuild_topic_words()
        self._topic_cache = None

    def _rebuild_topic_words(self) -> None:
        self.words = TopicWordState(self.K, self.data.V, self.config.eta)
        for r, bag in enumerate(self.data.bags):
            self.words.add(self.z[r], bag)

    def _reset_accumulators(self) -> None:
        d, K = self.data, self.K
        self.acc = {
            "a": np.zeros((d.U, K)),
            "mu": np.zeros((d.U, K)),
            "alpha": 0.0,
            "beta": 0.0,
            "gamma": np.zeros(K),
            "phi": np.zeros((K, d.V)),
            "z_count": np.zeros((d.R, K), dtype=np.int64),
            "n": 0,
        }
        self.trace = {"alpha": [], "beta": [], "gamma_index": [], "log_joint": []}

    @property
    def gamma(self) -> np.ndarray:
        return self.config.decay_grid[self.g]

    def current_params(self) -> ModelParams:
        return ModelParams(gamma=self.gamma.copy(), a=self.a.copy(), mu=self.mu.copy(),
                           alpha=self.alpha, beta=self.beta, phi=estimate_phi(self.words))

    def _invalidate(self) -> None:
        self._topic_cache = None

    # ---------------------------------------------------------------- parents

    def parent_probabilities(self, event: int):
        """Candidate parent posts (global source indices) of ``event`` and their probabilities."""
        d = self.data
        lo, hi = d.pair_start[event], d.pair_end[event]
        if hi <= lo:
            raise ValueError("the initial post of a thread has no parent")
        s = self.g[self.z[d.ev_thread[event]]]
        w = class_multipliers(self.alpha, self.beta)[d.pair_cls[lo:hi]] * d.pair_decay[s, lo:hi]
        return d.pair_src[lo:hi], w / w.sum()

    def sample_parent(self, event: int) -> int:
        src, p = self.parent_probabilities(event)
        i = int(np.searchsorted(np.cumsum(p), self.rng.random(), side="right"))
        i = min(i, len(p) - 1)
        self.parent[event] = self.data.pair_start[event] + i
        return int(src[i])

    def sample_parents(self) -> None:
        d = self.data
        if d.J == 0:
            return
        s_ev = self.g[self.z[d.ev_thread]]
        w = class_multipliers(self.alpha, self.beta)[d.pair_cls] * d.pair_decay[s_ev[d.pair_event], np.arange(d.P)]
        tot = _wsum(d.pair_event, weights=w, minlength=d.J)
        cs = np.cumsum(w / tot[d.pair_event])
        base = np.where(d.pair_start > 0, cs[np.maximum(d.pair_start - 1, 0)], 0.0)
        u = base + self.rng.random(d.J)
        idx = np.searchsorted(cs, u, side="right")
        self.parent = np.clip(idx, d.pair_start, d.pair_end - 1)

    def parent_edge_counts(self) -> tuple:
        """Number of parent links landing on post-first-post or explicit-reply sources,
        and on explicit-reply sources alone."""
        cls = self.data.pair_cls[self.parent]
        return int(np.count_nonzero(cls >= 1)), int(np.count_nonzero(cls == 2))

    # ----------------------------------------------------------- conjugates

    def _entry_terms(self):
        d = self.data
        s_r = self.g[self.z]
        s_e = s_r[d.ent_thread]
        k_e = self.z[d.ent_thread]
        X = d.ent_X[s_e, np.arange(d.E)]  # (E, 3)
        return s_r, k_e, X

    def interest_sufficient_stats(self, alpha=None, beta=None):
        """Event counts and multiplier-weighted exposures per (learner, topic)."""
        d, K = self.data, self.K
        alpha = self.alpha if alpha is None else alpha
        beta = self.beta if beta is None else beta
        s_r, k_e, X = self._entry_terms()
        etot = d.thread_exposure[np.arange(d.R), s_r]
        expo = np.tile(_wsum(self.z, weights=etot, minlength=K), (d.U, 1))
        corr = X @ class_multipliers(alpha, beta) - etot[d.ent_thread]
        expo += _wsum(d.ent_learner * K + k_e, weights=corr, minlength=d.U * K).reshape(d.U, K)
        counts = np.bincount(d.ev_learner * K + self.z[d.ev_thread], minlength=d.U * K).reshape(d.U, K)
        return counts, expo

    def interest_posterior(self):
        counts, expo = self.interest_sufficient_stats()
        return self.config.a_shape + counts, self.config.a_rate + expo

    def sample_interest(self) -> np.ndarray:
        shape, rate = self.interest_posterior()
        self.a = self.rng.gamma(shape, 1.0 / rate)
        self._invalidate()
        return self.a

    def alpha_posterior(self):
        d, c = self.data, self.config
        _, k_e, X = self._entry_terms()
        a_e = self.a[d.ent_learner, k_e]
        n_alpha, _ = self.parent_edge_counts()
        rate = c.alpha_rate + float(np.sum(a_e * (X[:, 1] + self.beta * X[:, 2])))
        return c.alpha_shape + n_alpha, rate

    def sample_alpha(self) -> float:
        shape, rate = self.alpha_posterior()
        self.alpha = float(self.rng.gamma(shape, 1.0 / rate))
        self._invalidate()
        return self.alpha

    def beta_posterior(self):
        d, c = self.data, self.config
        _, k_e, X = self._entry_terms()
        a_e = self.a[d.ent_learner, k_e]
        _, n_beta = self.parent_edge_counts()
        rate = c.beta_rate + float(np.sum(self.alpha * a_e * X[:, 2]))
        return c.beta_shape + n_beta, rate

    def sample_beta(self) -> float:
        shape, rate = self.beta_posterior()
        self.beta = float(self.rng.gamma(shape, 1.0 / rate))
        self._invalidate()
        return self.beta

    def initiation_counts(self) -> np.ndarray:
        d, K = self.data, self.K
        named = d.initiator >= 0
        return np.bincount(d.initiator[named] * K + self.z[named], minlength=d.U * K).reshape(d.U, K)

    def mu_posterior(self):
        c = self.config
        return c.mu_shape + self.initiation_counts(), np.full((self.data.U, self.K), c.mu_rate + self.T)

    def sample_mu(self) -> np.ndarray:
        shape, rate = self.mu_posterior()
        self.mu = self.rng.gamma(shape, 1.0 / rate)
        self._invalidate()
        return self.mu

    # ------------------------------------------------------------ decay rates

    def decay_log_weights(self) -> np.ndarray:
        """Unnormalized log posterior of every grid value for every topic, shape (K, S).

        Terms constant across the grid are dropped.  With ``collapse_rates``
        the interests ``a`` are integrated out against their Gamma prior, so
        that a decay rate and the interests scaled to it move together;
        otherwise the current ``a`` is conditioned on.
        """
        d, K, S, cfg = self.data, self.K, self.S, self.config
        ev_terms = d.thread_event_terms(self.alpha, self.beta)  # (S, R)
        Xm = d.entry_exposure(self.alpha, self.beta)  # (S, E)
        k_e = self.z[d.ent_thread]
        out = np.zeros((K, S))
        if cfg.collapse_rates:
            counts = np.bincount(d.ev_learner * K + self.z[d.ev_thread],
                                 minlength=d.U * K).reshape(d.U, K)
            shape = cfg.a_shape + counts
            for s in range(S):
                etot = d.thread_exposure[:, s]
                expo = np.tile(_wsum(self.z, weights=etot, minlength=K), (d.U, 1))
                corr = Xm[s] - etot[d.ent_thread]
                expo += _wsum(d.ent_learner * K + k_e, weights=corr,
                                    minlength=d.U * K).reshape(d.U, K)
                out[:, s] = _wsum(self.z, weights=ev_terms[s], minlength=K)
                out[:, s] -= np.sum(shape * np.log1p(expo / cfg.a_rate), axis=0)
            return out
        a_e = self.a[d.ent_learner, k_e]
        A = self.a.sum(axis=0)
        for s in range(S):
            ent = -a_e * (Xm[s] - d.thread_exposure[d.ent_thread, s])
            per_thread = ev_terms[s] + _wsum(d.ent_thread, weights=ent, minlength=d.R)
            per_thread -= A[self.z] * d.thread_exposure[:, s]
            out[:, s] = _wsum(self.z, weights=per_thread, minlength=K)
        return out

    def sample_decay(self) -> np.ndarray:
        lw = self.decay_log_weights()
        for k in range(self.K):
            self.g[k] = _categorical(self.rng, lw[k], f"gamma[{k}]")
        if self.config.collapse_rates:
            # complete the joint (decay rate, interest) move
            self.sample_interest()
        self._invalidate()
        return self.gamma

    # ----------------------------------------------------------------- topics

    def temporal_log_likelihoods(self) -> np.ndarray:
        """Log-likelihood of every thread's reply times under every topic, shape (R, K).

        Uses the current ``a``, ``alpha``, ``beta`` and decay rates; covers all
        learners, including those who never posted in the thread.
        """
        d, K = self.data, self.K
        ev_terms = d.thread_event_terms(self.alpha, self.beta)
        Xm = d.entry_exposure(self.alpha, self.beta)
        out = np.zeros((d.R, K))
        with np.errstate(divide="ignore"):
            log_a = np.log(self.a)
        for k in range(K):
            s = self.g[k]
            ll = ev_terms[s] + _wsum(d.ev_thread, weights=log_a[d.ev_learner, k], minlength=d.R)
            ent = -self.a[d.ent_learner, k] * (Xm[s] - d.thread_exposure[d.ent_thread, s])
            ll += _wsum(d.ent_thread, weights=ent, minlength=d.R)
            ll -= self.a[:, k].sum() * d.thread_exposure[:, s]
            out[:, k] = ll
        return out

    def _begin_topic_sweep(self) -> None:
        d = self.data
        cache = {
            "ev_terms": d.thread_event_terms(self.alpha, self.beta),  # (S, R)
        }
        if self.config.collapse_rates:
            counts, expo = self.interest_sufficient_stats()
            cache["N"] = counts.astype(float)
            cache["EX"] = expo
            cache["Xm"] = d.entry_exposure(self.alpha, self.beta)
            cache["n_init"] = self.initiation_counts().astype(float)
        else:
            cache["temporal"] = self.temporal_log_likelihoods()
            with np.errstate(divide="ignore"):
                cache["log_mu"] = np.log(self.mu)
        self._topic_cache = cache

    def _move_thread_stats(self, r: int, k: int, sign: float) -> None:
        d, c = self.data, self._topic_cache
        s = self.g[k]
        lo, hi = d.ent_slices[r], d.ent_slices[r + 1]
        etot = d.thread_exposure[r, s]
        c["EX"][:, k] += sign * etot
        if hi > lo:
            learners = d.ent_learner[lo:hi]
            c["EX"][learners, k] += sign * (c["Xm"][s, lo:hi] - etot)
            c["N"][learners, k] += sign * d.ent_nev[lo:hi]
        if d.initiator[r] >= 0:
            c["n_init"][d.initiator[r], k] += sign

    def topic_log_weights(self, r: int) -> np.ndarray:
        """Unnormalized log posterior over topics for thread ``r``.

        The thread's own counts must already be removed from the sufficient
        statistics (as :meth:`sample_topic` does).
        """
        if self._topic_cache is None:
            self._begin_topic_sweep()
        d, cfg, cache = self.data, self.config, self._topic_cache
        lw = text_log_likelihoods(d.bags[r], self.words)
        u1 = d.initiator[r]
        if not cfg.collapse_rates:
            lw = lw + cache["temporal"][r]
            if u1 >= 0:
                lw = lw + cache["log_mu"][u1]
            return lw
        g = self.g
        lw = lw + cache["ev_terms"][g, r]
        if u1 >= 0:
            lw = lw + np.log(cfg.mu_shape + cache["n_init"][u1])
        shape = cfg.a_shape + cache["N"]  # (U, K)
        rate = cfg.a_rate + cache["EX"]
        etot = d.thread_exposure[r, g]  # (K,)
        # learners who did not post: exp(-a * exposure) integrated over a
        lw = lw - np.sum(shape * np.log1p(etot / rate), axis=0)
        lo, hi = d.ent_slices[r], d.ent_slices[r + 1]
        if hi > lo:
            L = d.ent_learner[lo:hi]
            n = d.ent_nev[lo:hi, None].astype(float)
            x = cache["Xm"][g][:, lo:hi].T  # (posters, K)
            sh, rt = shape[L], rate[L]
            lw = lw + np.sum(
                sh * np.log1p(etot / rt)
                + gammaln(sh + n) - gammaln(sh)
                + sh * np.log(rt) - (sh + n) * np.log(rt + x),
                axis=0,
            )
        return lw

    def sample_topic(self, r: int) -> int:
        if self._topic_cache is None:
            self._begin_topic_sweep()
        bag = self.data.bags[r]
        k_old = int(self.z[r])
        self.words.remove(k_old, bag)
        if self.config.collapse_rates:
            self._move_thread_stats(r, k_old, -1.0)
        lw = self.topic_log_weights(r)
        k = _categorical(self.rng, lw, f"topic of thread {self.data.thread_ids[r]}")
        self.z[r] = k
        self.words.add(k, bag)
        if self.config.collapse_rates:
            self._move_thread_stats(r, k, 1.0)
        return k

    def sample_topics(self) -> np.ndarray:
        self._begin_topic_sweep()
        if self.K > 1:
            for r in range(self.data.R):
                self.sample_topic(r)
        self._invalidate()
        return self.z

    # ------------------------------------------------------------ diagnostics

    def log_joint(self) -> float:
        """``log p(texts, post times, topics | a, mu, alpha, beta, gamma)`` at the current state."""
        d = self.data
        temporal = self.temporal_log_likelihoods()[np.arange(d.R), self.z].sum()
        n_init = self.initiation_counts()
        with np.errstate(divide="ignore", invalid="ignore"):
            init = np.where(n_init > 0, n_init * np.log(self.mu), 0.0).sum() - self.mu.sum() * self.T
        eta, V = self.words.eta, self.words.V
        text = (gammaln(self.words.counts + eta).sum() - self.K * V * gammaln(eta)
                + self.K * gammaln(V * eta) - gammaln(self.words.totals + V * eta).sum())
        return float(temporal + init + text - d.R * math.log(self.K))

    # ------------------------------------------------------------------ sweep

    def sweep(self) -> None:
        self.sample_parents()
        self.sample_interest()
        self.sample_alpha()
        self.sample_beta()
        self.sample_mu()
        self.sample_decay()
        self.trace["alpha"].append(self.alpha)
        self.trace["beta"].append(self.beta)
        self.trace["gamma_index"].append(self.g.tolist())
        self.trace["log_joint"].append(self.log_joint())
        self.sample_topics()
        self.iteration += 1
        if self.iteration > self.config.burn_in:
            acc = self.acc
            acc["a"] += self.a
            acc["mu"] += self.mu
            acc["alpha"] += self.alpha
            acc["beta"] += self.beta
            acc["gamma"] += self.gamma
            acc["phi"] += estimate_phi(self.words)
            acc["z_count"][np.arange(self.data.R), self.z] += 1
            acc["n"] += 1

    def run(self, iterations: int | None = None, checkpoint=None, checkpoint_every: int = 0,
            callback=None) -> "PosteriorEstimate":
        """Run until ``config.iterations`` sweeps are done (or ``iterations`` more)."""
        stop = self.config.iterations if iterations is None else min(
            self.iteration + iterations, self.config.iterations)
        while self.iteration < stop:
            self.sweep()
            if callback is not None:
                callback(self)
            if checkpoint and checkpoint_every and self.iteration % checkpoint_every == 0:
                self.save_checkpoint(checkpoint)
        if checkpoint:
            self.save_checkpoint(checkpoint)
        return self.estimate()

    def estimate(self) -> PosteriorEstimate:
        acc = self.acc
        n = acc["n"]
        if n == 0:
            raise RuntimeError("no post-burn-in samples retained yet")
        params = ModelParams(
            gamma=acc["gamma"] / n, a=acc["a"] / n, mu=acc["mu"] / n,
            alpha=acc["alpha"] / n, beta=acc["beta"] / n, phi=acc["phi"] / n,
        )
        z_freq = acc["z_count"] / n
        trace = {
            "alpha": np.asarray(self.trace["alpha"]),
            "beta": np.asarray(self.trace["beta"]),
            "gamma": self.config.decay_grid[np.asarray(self.trace["gamma_index"], dtype=np.int64)],
            "gamma_index": np.asarray(self.trace["gamma_index"], dtype=np.int64),
            "log_joint": np.asarray(self.trace["log_joint"]),
        }
        return PosteriorEstimate(
            params=params,
            z_mode=np.argmax(acc["z_count"], axis=1),
            z_freq=z_freq,
            thread_ids=list(self.data.thread_ids),
            learners=list(self.corpus.learners),
            vocabulary=list(self.corpus.vocabulary),
            horizon=self.T,
            n_samples=n,
            trace=trace,
            config={**asdict(self.config), "half_lives": list(self.config.half_lives)},
        )

    # ------------------------------------------------------------ checkpoints

    def state_dict(self) -> dict:
        acc = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.acc.items()}
        return {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "iteration": self.iteration,
            "rng": self.rng.bit_generator.state,
            "z": self.z.tolist(),
            "g": self.g.tolist(),
            "a": self.a.tolist(),
            "mu": self.mu.tolist(),
            "alpha": self.alpha,
            "beta": self.beta,
            "parent": self.parent.tolist(),
            "acc": acc,
            "trace": self.trace,
        }

    def load_state_dict(self, state: dict) -> None:
        if state.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {state.get('version')}")
        self.iteration = state["iteration"]
        self.rng.bit_generator.state = state["rng"]
        self.z = np.asarray(state["z"], dtype=np.int64)
        self.g = np.asarray(state["g"], dtype=np.int64)
        self.a = np.asarray(state["a"], dtype=float).reshape(self.data.U, self.K)
        self.mu = np.asarray(state["mu"], dtype=float).reshape(self.data.U, self.K)
        self.alpha = float(state["alpha"])
        self.beta = float(state["beta"])
        self.parent = np.asarray(state["parent"], dtype=np.int64)
        acc = state["acc"]
        self.acc = {
            "a": np.asarray(acc["a"], dtype=float).reshape(self.data.U, self.K),
            "mu": np.asarray(acc["mu"], dtype=float).reshape(self.data.U, self.K),
            "alpha": float(acc["alpha"]),
            "beta": float(acc["beta"]),
            "gamma": np.asarray(acc["gamma"], dtype=float),
            "phi": np.asarray(acc["phi"], dtype=float).reshape(self.K, self.data.V),
            "z_count": np.asarray(acc["z_count"], dtype=np.int64).reshape(self.data.R, self.K),
            "n": int(acc["n"]),
        }
        self.trace = {k: list(v) for k, v in state["trace"].items()}
        self._rebuild_topic_words()
        self._invalidate()

    def save_checkpoint(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.state_dict(), fh)

    @classmethod
    def from_checkpoint(cls, path, corpus: ForumCorpus,
                        annotations: ReplyAnnotation | None = None) -> "GibbsSampler":
        with open(path) as fh:
            state = json.load(fh)
        config = SamplerConfig(**state["config"])
        sampler = cls(corpus, config, annotations)
        sampler.load_state_dict(state)
        return sampler


def run_gibbs(corpus: ForumCorpus, annotations: ReplyAnnotation | None = None,
              config: SamplerConfig | None = None, **run_kwargs) -> PosteriorEstimate:
    """Initialize from the priors, run ``config.iterations`` sweeps, return posterior means."""
    config = config or SamplerConfig()
    return GibbsSampler(corpus, config, annotations).run(**run_kwargs)


def write_trace_csv(estimate_or_sampler, path) -> None:
    """Trace rows: iteration, alpha, beta, decay rate per topic, log-joint."""
    import csv

    trace = estimate_or_sampler.trace
    grid = None
    if isinstance(estimate_or_sampler, GibbsSampler):
        grid = estimate_or_sampler.config.decay_grid
    gamma_idx = np.asarray(trace["gamma_index"], dtype=np.int64)
    if grid is not None:
        gammas = grid[gamma_idx]
    else:
        gammas = np.asarray(trace["gamma"])
    K = gammas.shape[1] if gammas.ndim == 2 else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "alpha", "beta"] + [f"gamma_{k}" for k in range(K)] + ["log_joint"])
        for i in range(len(trace["alpha"])):
            w.writerow([i + 1, repr(float(trace["alpha"][i])), repr(float(trace["beta"][i]))]
                       + [repr(float(x)) for x in gammas[i]] + [repr(float(trace["log_joint"][i]))])
