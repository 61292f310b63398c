"""Thread-level Dirichlet-multinomial text model.

Every token of a thread is drawn from the topic-word distribution of the
thread's single topic.  The distributions are integrated out against a
symmetric Dirichlet(eta) prior; ``estimate_phi`` gives the posterior mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


@dataclass(frozen=True)
class Bag:
    """Sparse bag-of-words: distinct word indices and their counts."""

    words: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_counts(cls, token_counts, word_index) -> "Bag":
        items = sorted((word_index[w], c) for w, c in token_counts.items() if c > 0)
        if not items:
            return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
        w, c = zip(*items)
        return cls(np.asarray(w, dtype=np.int64), np.asarray(c, dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


class TopicWordState:
    """Topic-by-word token counts under the current thread-topic assignment."""

    def __init__(self, K: int, V: int, eta: float = 0.01):
        if eta <= 0:
            raise ValueError("eta must be positive")
        self.counts = np.zeros((K, V), dtype=np.int64)
        self.totals = np.zeros(K, dtype=np.int64)
        self.eta = float(eta)

    @property
    def K(self) -> int:
        return self.counts.shape[0]

    @property
    def V(self) -> int:
        return self.counts.shape[1]

    def add(self, k: int, bag: Bag) -> None:
        self.counts[k, bag.words] += bag.counts
        self.totals[k] += bag.total

    def remove(self, k: int, bag: Bag) -> None:
        self.counts[k, bag.words] -= bag.counts
        self.totals[k] -= bag.total
        if self.totals[k] < 0 or np.any(self.counts[k, bag.words] < 0):
            raise ValueError(f"removed more tokens than topic {k} holds")

    def copy(self) -> "TopicWordState":
        out = TopicWordState(self.K, self.V, self.eta)
        out.counts = self.counts.copy()
        out.totals = self.totals.copy()
        return out


def text_log_likelihoods(bag: Bag, state: TopicWordState) -> np.ndarray:
    """Predictive log-probability of ``bag`` under every topic (length-K array)."""
    if bag.words.size == 0:
        return np.zeros(state.K)
    if bag.words.max() >= state.V or bag.words.min() < 0:
        raise ValueError("token outside vocabulary")
    eta = state.eta
    c = state.counts[:, bag.words] + eta
    word_part = (gammaln(c + bag.counts) - gammaln(c)).sum(axis=1)
    tot = state.totals + state.V * eta
    return word_part - (gammaln(tot + bag.total) - gammaln(tot))


def text_log_likelihood(bag: Bag, k: int, state: TopicWordState) -> float:
    return float(text_log_likelihoods(bag, state)[k])


def estimate_phi(state: TopicWordState) -> np.ndarray:
    """Posterior-mean topic-word matrix; each row sums to one."""
    num = state.counts + state.eta
    return num / num.sum(axis=1, keepdims=True)


def top_words(phi_k, vocabulary, n: int) -> list:
    """The ``n`` most probable words; equal probabilities break alphabetically."""
    phi_k = np.asarray(phi_k)
    if n > len(vocabulary):
        raise ValueError("n exceeds vocabulary size")
    order = sorted(range(len(vocabulary)), key=lambda i: (-phi_k[i], vocabulary[i]))
    return [vocabulary[i] for i in order[:n]]
