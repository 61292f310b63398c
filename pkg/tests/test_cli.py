import csv
import json

import pytest

from forumhawkes.cli import main, sampler_config
from forumhawkes.config import read_kv_file
from forumhawkes.forumdata import ingest_corpus
from forumhawkes.inference import GibbsSampler

SMALL = """learners = 30
topics = 2
vocabulary = 30
horizon = 20
half_lives = 0.25 2
threads_per_day = 3
iterations = 6
burn_in = 2
K = 2
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "small.cfg").write_text(SMALL)
    return tmp_path


def run(*args):
    return main([str(a) for a in args])


def simulate(d, seed=1):
    assert run("simulate", "--config", d / "small.cfg", "--output", d / "c.jsonl", "--seed", seed) == 0
    return d / "c.jsonl"


class TestSimulate:
    def test_writes_corpus_and_truth(self, workdir):
        path = simulate(workdir)
        corpus = ingest_corpus(path)
        assert len(corpus.learners) == 30
        assert corpus.metadata["seed"] == 1
        truth = json.loads((workdir / "c.jsonl.truth.json").read_text())
        assert set(truth) >= {"params", "topics", "parents", "seed"}

    def test_seed_reproducible(self, workdir):
        first = simulate(workdir).read_bytes()
        assert simulate(workdir).read_bytes() == first
        assert simulate(workdir, seed=2).read_bytes() != first

    def test_supercritical(self, workdir, capsys):
        (workdir / "bad.cfg").write_text("branching = 1.5\n")
        assert run("simulate", "--config", workdir / "bad.cfg", "--output", workdir / "x.jsonl") == 2
        assert "supercritical" in capsys.readouterr().err
        assert not (workdir / "x.jsonl").exists()

    def test_zero_learners(self, workdir):
        (workdir / "bad.cfg").write_text("learners = 0\n")
        with pytest.raises(SystemExit) as info:
            run("simulate", "--config", workdir / "bad.cfg", "--output", workdir / "x.jsonl")
        assert info.value.code == 2

    def test_help(self, capsys):
        with pytest.raises(SystemExit) as info:
            run("--help")
        assert info.value.code == 0
        assert "simulate" in capsys.readouterr().out

    def test_bad_flag(self, workdir):
        with pytest.raises(SystemExit) as info:
            run("simulate", "--bogus")
        assert info.value.code != 0


class TestTrain:
    def test_estimate_and_trace(self, workdir):
        c = simulate(workdir)
        assert run("train", "--input", c, "--config", workdir / "small.cfg", "--output", workdir / "e.json",
                   "--trace", workdir / "t.csv") == 0
        rows = list(csv.reader(open(workdir / "t.csv")))
        assert len(rows) == 1 + 6
        est = json.loads((workdir / "e.json").read_text())
        assert est["config"]["seed"] == 0 and est["n_samples"] == 4

    def test_resume_matches_uninterrupted(self, workdir):
        c = simulate(workdir)
        cfg = workdir / "small.cfg"
        run("train", "--input", c, "--config", cfg, "--output", workdir / "full.json", "--trace", workdir / "full.csv")
        # an interrupted run: stop after 3 of the 6 sweeps, leaving a checkpoint
        ck = workdir / "ck.json"
        s = GibbsSampler(ingest_corpus(c), sampler_config(read_kv_file(cfg), 0))
        s.run(iterations=3, checkpoint=ck)
        run("train", "--input", c, "--config", cfg, "--output", workdir / "resumed.json",
            "--checkpoint", ck, "--resume", "--trace", workdir / "resumed.csv")
        assert (workdir / "resumed.json").read_bytes() == (workdir / "full.json").read_bytes()
        assert (workdir / "resumed.csv").read_bytes() == (workdir / "full.csv").read_bytes()

    def test_missing_corpus(self, workdir, capsys):
        assert run("train", "--input", workdir / "nope.jsonl", "--output", workdir / "e.json") == 1
        assert "not found" in capsys.readouterr().err
        assert not (workdir / "e.json").exists()


class TestRecommendEvaluateAnalyze:
    def test_pipeline(self, workdir):
        c = simulate(workdir)
        cfg = workdir / "small.cfg"
        assert run("recommend", "--input", c, "--config", cfg, "--T1", 14, "--T2", 18,
                   "--output", workdir / "r.csv", "--top", 3) == 0
        rows = list(csv.DictReader(open(workdir / "r.csv")))
        assert rows and set(rows[0]) == {"learner_id", "rank", "thread_id", "probability"}
        assert max(int(r["rank"]) for r in rows) == 3
        assert all(0 <= float(r["probability"]) <= 1 for r in rows)

        (workdir / "grid.cfg").write_text(SMALL + "T1_grid = 14\nwindow_grid = 4\nK_grid = 2\nN_grid = 5\n")
        assert run("evaluate", "--input", c, "--config", workdir / "grid.cfg", "--output", workdir / "s.csv") == 0
        rows = list(csv.DictReader(open(workdir / "s.csv")))
        assert [r["method"] for r in rows] == ["model", "PPL", "REC"]

        assert run("train", "--input", c, "--config", cfg, "--output", workdir / "e.json") == 0
        assert run("analyze", "--input", c, "--estimate", workdir / "e.json", "--output", workdir / "rep") == 0
        weekly = list(csv.DictReader(open(workdir / "rep" / "weekly.csv")))
        assert sum(int(v) for r in weekly for k, v in r.items() if k != "week") == ingest_corpus(c).n_posts
        assert (workdir / "rep" / "half_lives.csv").exists()
        assert (workdir / "rep" / "excitation.csv").exists()

    def test_recommend_needs_split(self, workdir):
        c = simulate(workdir)
        with pytest.raises(SystemExit):
            run("recommend", "--input", c, "--output", workdir / "r.csv")
        assert not (workdir / "r.csv").exists()

    def test_bad_grid(self, workdir):
        c = simulate(workdir)
        (workdir / "g.cfg").write_text("N_grid = 0\n")
        with pytest.raises(SystemExit):
            run("evaluate", "--input", c, "--config", workdir / "g.cfg", "--output", workdir / "s.csv")
