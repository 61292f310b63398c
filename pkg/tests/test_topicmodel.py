import numpy as np
import pytest

from forumhawkes.topicmodel import (
    Bag,
    TopicWordState,
    estimate_phi,
    text_log_likelihood,
    text_log_likelihoods,
    top_words,
)


def polya_sequential(counts_k, total_k, words, eta, V):
    """Predictive probability by adding tokens one at a time (Polya urn)."""
    c = counts_k.astype(float).copy()
    tot = float(total_k)
    lp = 0.0
    for w in words:
        lp += np.log((c[w] + eta) / (tot + V * eta))
        c[w] += 1
        tot += 1
    return lp


class TestTopicWordState:
    def test_add_remove(self):
        s = TopicWordState(2, 5)
        b = Bag(np.array([0, 3]), np.array([2, 1]))
        s.add(1, b)
        assert s.totals.tolist() == [0, 3]
        s.remove(1, b)
        assert s.counts.sum() == 0
        with pytest.raises(ValueError):
            s.remove(0, b)

    def test_bag_from_counts(self):
        b = Bag.from_counts({"b": 2, "a": 1, "z": 0}, {"a": 0, "b": 1, "z": 2})
        assert b.words.tolist() == [0, 1] and b.counts.tolist() == [1, 2] and b.total == 3

    def test_eta_positive(self):
        with pytest.raises(ValueError):
            TopicWordState(1, 1, eta=0.0)


class TestLikelihood:
    def test_matches_sequential_urn(self):
        rng = np.random.default_rng(0)
        V, K, eta = 12, 3, 0.01
        s = TopicWordState(K, V, eta)
        for k in range(K):
            w = rng.integers(0, V, 30)
            s.add(k, Bag(*np.unique(w, return_counts=True)))
        words = rng.integers(0, V, 9)
        bag = Bag(*np.unique(words, return_counts=True))
        got = text_log_likelihoods(bag, s)
        for k in range(K):
            assert got[k] == pytest.approx(polya_sequential(s.counts[k], s.totals[k], words, eta, V))
        assert text_log_likelihood(bag, 1, s) == got[1]

    def test_empty_bag(self):
        s = TopicWordState(2, 3)
        np.testing.assert_array_equal(text_log_likelihoods(Bag(np.empty(0, int), np.empty(0, int)), s), 0)

    def test_out_of_vocabulary(self):
        with pytest.raises(ValueError):
            text_log_likelihoods(Bag(np.array([5]), np.array([1])), TopicWordState(1, 3))


class TestPhi:
    def test_rows_sum_to_one(self):
        s = TopicWordState(2, 4)
        s.add(0, Bag(np.array([1]), np.array([10])))
        phi = estimate_phi(s)
        np.testing.assert_allclose(phi.sum(axis=1), 1.0)
        assert phi[0].argmax() == 1
        np.testing.assert_allclose(phi[1], 0.25)

    def test_top_words_ties_alphabetical(self):
        assert top_words([0.1, 0.4, 0.1, 0.4], ["d", "c", "b", "a"], 3) == ["a", "c", "b"]
        with pytest.raises(ValueError):
            top_words([1.0], ["a"], 2)
