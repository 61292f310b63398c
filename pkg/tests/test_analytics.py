import math

import numpy as np
import pytest

from forumhawkes.analytics import (
    excitation_levels,
    half_life_table,
    weekly_topic_counts,
    write_excitation_csv,
    write_half_lives_csv,
    write_weekly_csv,
)
from forumhawkes.inference import PosteriorEstimate, SamplerConfig, run_gibbs
from forumhawkes.ppcore import ModelParams

from conftest import small_sim


def estimate(gamma, alpha=2.0, beta=3.0, vocab=("a", "b", "c"), thread_ids=(), z=()):
    K, V = len(gamma), len(vocab)
    phi = np.tile(np.arange(1, V + 1, dtype=float), (K, 1))
    phi /= phi.sum(axis=1, keepdims=True)
    return PosteriorEstimate(
        params=ModelParams(gamma=gamma, a=np.zeros((1, K)), mu=np.zeros((1, K)), alpha=alpha, beta=beta, phi=phi),
        z_mode=np.asarray(z, dtype=np.int64), z_freq=np.zeros((len(z), K)), thread_ids=list(thread_ids),
        learners=["u"], vocabulary=list(vocab), horizon=1.0, n_samples=1,
    )


class TestHalfLives:
    def test_one_day(self):
        rows = half_life_table(estimate([math.log(2)]))
        assert rows[0]["half_life_days"] == pytest.approx(1.0)
        assert rows[0]["top_words"] == ["c", "b", "a"]

    def test_sorted_fastest_first(self):
        rows = half_life_table(estimate([0.1, 10.0, 1.0]), n_words=2)
        assert [r["topic"] for r in rows] == [1, 2, 0]
        assert all(len(r["top_words"]) == 2 for r in rows)


class TestExcitation:
    def test_combined_multiplier(self):
        lv = excitation_levels(estimate([1.0], alpha=29.0, beta=19.2))
        assert lv["alpha_beta"] == pytest.approx(556.8)


class TestWeekly:
    def test_counts_sum_to_posts(self):
        corpus, _ = small_sim(seed=3, horizon=20.0)
        est = run_gibbs(corpus, config=SamplerConfig(K=2, iterations=3, burn_in=1, half_lives=(0.25, 2.0)))
        counts = weekly_topic_counts(corpus, est)
        assert counts.shape == (3, 2)
        assert counts.sum() == corpus.n_posts
        per_topic = np.zeros(2, dtype=int)
        for t, k in zip(corpus.threads, est.z_mode):
            per_topic[k] += len(t.posts)
        np.testing.assert_array_equal(counts.sum(axis=0), per_topic)

    def test_unknown_thread(self):
        corpus, _ = small_sim(seed=3, horizon=5.0)
        with pytest.raises(KeyError):
            weekly_topic_counts(corpus, estimate([1.0]))


def test_csv_writers(tmp_path):
    est = estimate([math.log(2), 1.0])
    write_half_lives_csv(half_life_table(est, 2), tmp_path / "h.csv")
    write_excitation_csv(excitation_levels(est), tmp_path / "e.csv")
    write_weekly_csv(np.array([[1, 2], [0, 3]]), tmp_path / "w.csv")
    assert (tmp_path / "h.csv").read_text().splitlines()[1].startswith("1,0.69")
    assert (tmp_path / "e.csv").read_text().splitlines() == ["alpha,beta,alpha_beta", "2.0,3.0,6.0"]
    assert (tmp_path / "w.csv").read_text().splitlines() == ["week,topic_0,topic_1", "0,1,2", "1,0,3"]
