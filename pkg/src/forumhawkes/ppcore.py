"""Rate functions, compensators and log-likelihoods for the forum point process.

Learner ``u`` in thread ``r`` on topic ``k`` posts with rate

    a[u, k] * sum_{t_p < t} m_p * exp(-gamma[k] * (t - t_p))

where the multiplier ``m_p`` is 1 for posts made before u's first post in
the thread, ``alpha`` for later posts and ``alpha * beta`` for later posts
that explicitly reply to u.  Thread-initiating posts follow a homogeneous
Poisson process with rate ``mu[u, k]``.

All likelihoods are in log space.  A zero rate at an observed event gives
``NEG_INF``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.special import logsumexp

NEG_INF = -math.inf


class ExcitationClass(IntEnum):
    PRE_FIRST_POST = 0
    POST_FIRST_POST = 1
    EXPLICIT_REPLY = 2

    def multiplier(self, alpha: float, beta: float) -> float:
        return (1.0, alpha, alpha * beta)[self]


def class_multipliers(alpha: float, beta: float) -> np.ndarray:
    """Multipliers indexed by :class:`ExcitationClass`."""
    return np.array([1.0, alpha, alpha * beta])


@dataclass
class ModelParams:
    """All continuous model parameters; learner rows follow ``corpus.learners``."""

    gamma: np.ndarray
    a: np.ndarray
    mu: np.ndarray
    alpha: float
    beta: float
    phi: np.ndarray | None = None

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if self.phi is not None:
            self.phi = np.asarray(self.phi, dtype=float)

    @property
    def K(self) -> int:
        return len(self.gamma)

    @property
    def U(self) -> int:
        return self.a.shape[0]

    @property
    def half_lives(self) -> np.ndarray:
        return math.log(2) / self.gamma

    def validate(self) -> None:
        if np.any(self.gamma <= 0):
            raise ValueError("decay rates must be positive")
        if self.a.shape != self.mu.shape or self.a.shape[1] != self.K:
            raise ValueError("a and mu must both be U x K")
        if np.any(self.a < 0) or np.any(self.mu < 0):
            raise ValueError("a and mu must be nonnegative")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.phi is not None:
            if self.phi.shape[0] != self.K:
                raise ValueError("phi must have K rows")
            if np.any(np.abs(self.phi.sum(axis=1) - 1.0) > 1e-9):
                raise ValueError("phi rows must sum to 1")

    def to_dict(self) -> dict:
        out = {
            "gamma": self.gamma.tolist(),
            "a": self.a.tolist(),
            "mu": self.mu.tolist(),
            "alpha": float(self.alpha),
            "beta": float(self.beta),
        }
        if self.phi is not None:
            out["phi"] = self.phi.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(
            gamma=d["gamma"], a=d["a"], mu=d["mu"], alpha=d["alpha"], beta=d["beta"],
            phi=d.get("phi"),
        )


@dataclass(frozen=True)
class EventContext:
    """Sources and own events for one (learner, thread) pair.

    ``source_times`` holds every post in the thread (anonymous ones included),
    ``source_classes`` its excitation class relative to the learner, and
    ``event_times`` the learner's own posts other than the thread's initial post.
    """

    learner: str
    learner_index: int
    thread_id: str
    source_times: np.ndarray
    source_classes: np.ndarray
    event_times: np.ndarray = field(default_factory=lambda: np.empty(0))


def source_classes(thread, annotations, learner: str) -> np.ndarray:
    """Excitation class of every post in ``thread`` as seen by ``learner``."""
    first = annotations.first_post_index.get((learner, thread.thread_id))
    out = np.zeros(len(thread.posts), dtype=np.int8)
    if first is None:
        return out
    for i, p in enumerate(thread.posts):
        if i < first:
            continue
        if learner in annotations.recipients.get(p.post_id, ()):
            out[i] = ExcitationClass.EXPLICIT_REPLY
        else:
            out[i] = ExcitationClass.POST_FIRST_POST
    return out


def build_context(thread, annotations, learner: str, learner_index: int = -1,
                  before: float | None = None) -> EventContext:
    """Context for ``learner`` in ``thread``; ``before`` drops posts at or after it."""
    posts = thread.posts
    if before is not None:
        posts = tuple(p for p in posts if p.time < before)
    classes = source_classes(thread, annotations, learner)[: len(posts)]
    times = np.array([p.time for p in posts], dtype=float)
    own = np.array(
        [p.time for i, p in enumerate(posts) if i > 0 and p.learner == learner], dtype=float
    )
    return EventContext(learner, learner_index, thread.thread_id, times, classes, own)


def kernel(dt, gamma):
    """Exponential decay ``exp(-gamma * dt)``."""
    dt = np.asarray(dt, dtype=float)
    if gamma <= 0:
        raise ValueError("decay rate must be positive")
    if np.any(dt < 0):
        raise ValueError("kernel is defined for nonnegative lags only")
    out = np.exp(-gamma * dt)
    return float(out) if out.ndim == 0 else out


def _mult(context: EventContext, params: ModelParams) -> np.ndarray:
    return class_multipliers(params.alpha, params.beta)[context.source_classes]


def reply_rate(context: EventContext, k: int, t: float, params: ModelParams) -> float:
    """Rate of ``context.learner`` posting at ``t`` given posts strictly before ``t``."""
    live = context.source_times < t
    if not np.any(live):
        return 0.0
    a = params.a[context.learner_index, k]
    m = _mult(context, params)[live]
    return float(a * np.sum(m * np.exp(-params.gamma[k] * (t - context.source_times[live]))))


def reply_rate_integral(context: EventContext, k: int, t0: float, t1: float,
                        params: ModelParams) -> float:
    """Closed-form integral of :func:`reply_rate` over ``[t0, t1]``."""
    if not 0 <= t0 <= t1:
        raise ValueError("need 0 <= t0 <= t1")
    tp = context.source_times
    live = tp < t1
    if not np.any(live) or t0 == t1:
        return 0.0
    g = params.gamma[k]
    a = params.a[context.learner_index, k]
    tp = tp[live]
    m = _mult(context, params)[live]
    start = np.maximum(t0, tp)
    # exp(-g (start - tp)) - exp(-g (t1 - tp)), written to keep precision for small g*dt
    mass = np.exp(-g * (start - tp)) * -np.expm1(-g * (t1 - start))
    return float(a / g * np.sum(m * mass))


def log_reply_rate(context: EventContext, k: int, t: float, params: ModelParams) -> float:
    """``log reply_rate`` evaluated without underflow for distant sources."""
    live = context.source_times < t
    a = params.a[context.learner_index, k]
    m = _mult(context, params)[live]
    if not np.any(live) or a <= 0 or not np.any(m > 0):
        return NEG_INF
    lag = t - context.source_times[live]
    return float(math.log(a) + logsumexp(-params.gamma[k] * lag, b=m))


def thread_log_likelihood(context: EventContext, k: int, params: ModelParams,
                          horizon: float, start: float = 0.0) -> float:
    """Log-likelihood of the learner's posts in the thread over ``[start, horizon)``."""
    ll = -reply_rate_integral(context, k, start, horizon, params)
    for t in context.event_times:
        if start <= t <= horizon:
            lr = log_reply_rate(context, k, t, params)
            if lr == NEG_INF:
                return NEG_INF
            ll += lr
    return ll


def initial_post_log_likelihood(n_started: int, horizon: float, mu: float) -> float:
    """Log-likelihood of ``n_started`` thread initiations at constant rate ``mu``."""
    if n_started < 0 or horizon <= 0 or mu < 0:
        raise ValueError("need n_started >= 0, horizon > 0, mu >= 0")
    if n_started == 0:
        return -mu * horizon
    if mu == 0:
        return NEG_INF
    return n_started * math.log(mu) - mu * horizon
