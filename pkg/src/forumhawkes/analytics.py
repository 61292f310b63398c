"""Summaries of a trained model: topic half-lives, excitation levels and weekly activity."""

from __future__ import annotations

import csv
import math

import numpy as np

from .forumdata import ForumCorpus
from .inference import PosteriorEstimate
from .topicmodel import top_words

WEEK = 7.0


def half_life_table(estimate: PosteriorEstimate, n_words: int = 10) -> list:
    """One row per topic: ``topic, half_life_days, top_words``, fastest-decaying first."""
    p = estimate.params
    n = min(n_words, len(estimate.vocabulary))
    rows = []
    for k in range(p.K):
        rows.append({
            "topic": k,
            "half_life_days": math.log(2) / float(p.gamma[k]),
            "top_words": top_words(p.phi[k], estimate.vocabulary, n) if p.phi is not None else [],
        })
    rows.sort(key=lambda row: (row["half_life_days"], row["topic"]))
    return rows


def excitation_levels(estimate: PosteriorEstimate) -> dict:
    """``alpha``, ``beta`` and the combined explicit-reply multiplier ``alpha * beta``."""
    a, b = float(estimate.params.alpha), float(estimate.params.beta)
    return {"alpha": a, "beta": b, "alpha_beta": a * b}


def weekly_topic_counts(corpus: ForumCorpus, estimate: PosteriorEstimate) -> np.ndarray:
    """Posts per (week, topic), weeks counted as ``floor(time / 7)`` from time zero.

    Each thread's posts count toward its most probable topic.
    """
    topic = dict(zip(estimate.thread_ids, estimate.z_mode))
    n_weeks = int(math.floor(corpus.horizon / WEEK)) + 1
    out = np.zeros((n_weeks, estimate.K), dtype=np.int64)
    for t in corpus.threads:
        if t.thread_id not in topic:
            raise KeyError(f"thread {t.thread_id} is not in the estimate")
        k = topic[t.thread_id]
        for p in t.posts:
            out[int(math.floor(p.time / WEEK)), k] += 1
    return out


def write_half_lives_csv(rows: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["topic", "half_life_days", "top_words"])
        for row in rows:
            w.writerow([row["topic"], repr(row["half_life_days"]), " ".join(row["top_words"])])


def write_excitation_csv(levels: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "beta", "alpha_beta"])
        w.writerow([repr(levels["alpha"]), repr(levels["beta"]), repr(levels["alpha_beta"])])


def write_weekly_csv(counts: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["week"] + [f"topic_{k}" for k in range(counts.shape[1])])
        for week, row in enumerate(counts):
            w.writerow([week] + [int(x) for x in row])
