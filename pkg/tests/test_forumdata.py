import json

import pytest

from forumhawkes.forumdata import (
    CorpusFormatError,
    CorpusStructureError,
    EmptyCorpusError,
    PreprocessConfig,
    build_corpus,
    clean_tokens,
    extract_reply_annotations,
    frequency_filter,
    ingest_corpus,
    load_preprocess_config,
    preprocess_corpus,
    preprocess_text,
    write_corpus,
)

from conftest import post


class TestBuildCorpus:
    def test_posts_sorted_and_tokenized(self):
        c = build_corpus({"t": [post("b", "u", 2.0, "Second Post"), post("a", "u", 1.0, "first")]})
        assert [p.post_id for p in c.threads[0].posts] == ["a", "b"]
        assert c.threads[0].posts[1].tokens == ("second", "post")
        assert c.horizon == 2.0
        assert c.learners == ("u",)

    def test_equal_timestamps_rejected(self):
        with pytest.raises(CorpusStructureError, match="share timestamp"):
            build_corpus({"t": [post("a", "u", 1.0), post("b", "v", 1.0)]})

    def test_parent_must_precede(self):
        with pytest.raises(CorpusStructureError, match="parent"):
            build_corpus({"t": [post("a", "u", 1.0, parent="b"), post("b", "v", 2.0)]})

    def test_duplicate_ids(self):
        with pytest.raises(CorpusStructureError, match="duplicate"):
            build_corpus({"t": [post("a", "u", 1.0), post("a", "v", 2.0)]})

    def test_undeclared_learner(self):
        with pytest.raises(CorpusStructureError, match="undeclared"):
            build_corpus({"t": [post("a", "zed", 1.0)]}, learners=["u"])

    def test_horizon_before_last_post(self):
        with pytest.raises(CorpusStructureError, match="horizon"):
            build_corpus({"t": [post("a", "u", 3.0)]}, horizon=2.0)

    def test_anonymous_not_a_learner(self, tiny_corpus):
        assert None not in tiny_corpus.learners
        assert tiny_corpus.threads[0].posts[2].anonymous

    def test_token_counts(self, tiny_corpus):
        t1 = tiny_corpus.threads[0]
        assert t1.token_counts["gradient"] == 2
        assert sum(t1.token_counts.values()) == sum(len(p.tokens) for p in t1.posts)


class TestText:
    def test_clean_tokens_strips_urls_and_punctuation(self):
        assert clean_tokens("See https://x.org/a?b=1, it's GREAT!") == ["see", "its", "great"]

    def test_case_preserved_on_request(self):
        assert clean_tokens("Mixed Case", lowercase=False) == ["Mixed", "Case"]

    def test_stopwords_removed(self):
        cfg = PreprocessConfig(stopwords=frozenset({"the"}))
        assert preprocess_text("The cat the hat", cfg) == ["cat", "hat"]

    def test_frequency_filter(self):
        docs = [["a", "b"], ["a", "c"], ["a"]] + [["c", "d"]] * 7
        # a: count 3, in 3/10 docs; c: count 8, in 8/10 docs
        assert frequency_filter(docs, min_count=3, max_doc_frac=0.5) == {"a"}
        assert frequency_filter(docs, min_count=1, max_doc_frac=1.0) == {"a", "b", "c", "d"}

    def test_preprocess_corpus_vocabulary(self, tiny_corpus):
        cfg = PreprocessConfig(stopwords=frozenset(), min_count=2, max_doc_frac=1.0)
        out = preprocess_corpus(tiny_corpus, cfg)
        assert out.vocabulary == ("gradient",)
        assert out.threads[0].token_counts == {"gradient": 2}
        assert dict(out.threads[1].token_counts) == {}

    def test_load_preprocess_config(self, tmp_path):
        (tmp_path / "stop.txt").write_text("Foo bar\nbaz")
        (tmp_path / "p.cfg").write_text("stopwords = stop.txt\nmin_count = 2  # rare\nmax_doc_frac = 0.5\n")
        cfg = load_preprocess_config(tmp_path / "p.cfg")
        assert cfg.stopwords == frozenset({"foo", "bar", "baz"})
        assert cfg.min_count == 2 and cfg.max_doc_frac == 0.5


class TestJsonl:
    def test_round_trip(self, tiny_corpus, tmp_path):
        path = tmp_path / "c.jsonl"
        write_corpus(tiny_corpus, path)
        back = ingest_corpus(path)
        assert back == tiny_corpus
        assert back.learners == ("ann", "bob", "cat", "dan")
        assert back.horizon == 5.0

    def test_simulated_round_trip(self, sim_corpus, tmp_path):
        corpus, _ = sim_corpus
        path = tmp_path / "s.jsonl"
        write_corpus(corpus, path)
        assert ingest_corpus(path) == corpus

    def test_plain_thread_lines(self, tmp_path):
        path = tmp_path / "c.jsonl"
        rec = {"thread_id": 7, "posts": [{"post_id": 1, "learner": None, "time": 0.5, "text": "hi there"}]}
        path.write_text(json.dumps(rec) + "\n\n")
        c = ingest_corpus(path)
        assert c.threads[0].thread_id == "7"
        assert c.threads[0].posts[0].learner is None
        assert c.learners == ()

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        good = json.dumps({"thread_id": "t", "posts": [{"post_id": "a", "learner": "u", "time": 1}]})
        path.write_text(good + "\n{oops\n")
        with pytest.raises(CorpusFormatError) as info:
            ingest_corpus(path)
        assert info.value.line_no == 2

    def test_negative_time(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps({"thread_id": "t", "posts": [{"post_id": "a", "time": -1}]}) + "\n")
        with pytest.raises(CorpusFormatError, match="negative"):
            ingest_corpus(path)

    def test_missing_posts(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps({"thread_id": "t"}) + "\n")
        with pytest.raises(CorpusFormatError):
            ingest_corpus(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text("")
        with pytest.raises(EmptyCorpusError):
            ingest_corpus(path)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            ingest_corpus(tmp_path / "x", format="csv")


class TestReplyAnnotations:
    def test_recipients(self, tiny_corpus):
        ann = extract_reply_annotations(tiny_corpus)
        r = ann.recipients
        assert r["p1"] == frozenset()
        assert r["p2"] == {"ann"}  # first comment under ann's post
        assert r["p3"] == frozenset()  # anonymous posts reply to nobody
        assert r["p4"] == {"bob"}  # mention of an earlier author
        assert r["p5"] == frozenset()  # second comment under p1 is not a reply
        assert r["q2"] == {"bob"}

    def test_first_post_index(self, tiny_corpus):
        f = extract_reply_annotations(tiny_corpus).first_post_index
        assert f[("ann", "t1")] == 0
        assert f[("bob", "t1")] == 1
        assert f[("cat", "t1")] == 4
        assert ("dan", "t1") not in f

    def test_self_and_future_mentions_ignored(self):
        c = build_corpus({"t": [
            post("a", "u", 1.0, mentions=["u", "v"]),
            post("b", "v", 2.0, parent="a"),
            post("c", "v", 3.0, parent="b"),
        ]})
        r = extract_reply_annotations(c).recipients
        assert r["a"] == frozenset()  # v has not posted yet; u is the author
        assert r["b"] == {"u"}
        assert r["c"] == frozenset()  # first comment under own post

    def test_comment_under_anonymous_post(self):
        c = build_corpus({"t": [post("a", None, 1.0), post("b", "v", 2.0, parent="a")]})
        assert extract_reply_annotations(c).recipients["b"] == frozenset()
