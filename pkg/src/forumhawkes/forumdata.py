"""Forum data model, JSONL ingestion, text preprocessing and reply annotations.

A corpus file holds one thread per line::

    {"thread_id": "t1", "posts": [{"post_id": "p1", "learner": "ann",
      "time": 0.5, "text": "...", "parent_post_id": null, "mentions": []}]}

``learner: null`` marks an anonymous post.  An optional line of the form
``{"corpus": {"horizon": ..., "learners": [...], "vocabulary": [...]}}``
carries corpus-level metadata that cannot be recovered from the threads alone
(learners who never post, the observation horizon, seeds).
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

ANONYMOUS = None

DEFAULT_STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can could did do does doing
    down during each few for from further had has have having he her here hers
    herself him himself his how i if in into is it its itself just me more most
    my myself no nor not now of off on once only or other our ours ourselves
    out over own same she should so some such than that the their theirs them
    themselves then there these they this those through to too under until up
    very was we were what when where which while who whom why will with would
    you your yours yourself yourselves hi hello thanks thank please also get
    got one like
    """.split()
)

_URL_RE = re.compile(r"(https?://\S+|www\.\S+|\b\S+\.(com|org|net|edu|io|co)\S*)", re.I)
_WORD_RE = re.compile(r"[A-Za-z0-9_']+")


class CorpusError(ValueError):
    """Base class for corpus ingestion problems."""


class CorpusFormatError(CorpusError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CorpusStructureError(CorpusError):
    pass


class EmptyCorpusError(CorpusError):
    pass


@dataclass(frozen=True)
class Post:
    post_id: str
    thread_id: str
    learner: str | None
    time: float
    text: str = ""
    parent_post_id: str | None = None
    mentions: frozenset = frozenset()
    # derived from ``text``; never serialized
    tokens: tuple = field(default=(), compare=True)

    @property
    def anonymous(self) -> bool:
        return self.learner is None


@dataclass(frozen=True)
class Thread:
    thread_id: str
    posts: tuple
    token_counts: Mapping[str, int]

    @property
    def initiator(self) -> str | None:
        return self.posts[0].learner

    @property
    def start_time(self) -> float:
        return self.posts[0].time

    def __len__(self):
        return len(self.posts)


@dataclass(frozen=True)
class ForumCorpus:
    threads: tuple
    learners: tuple
    vocabulary: tuple
    horizon: float
    metadata: Mapping = field(default_factory=dict, compare=False)

    @property
    def n_posts(self) -> int:
        return sum(len(t.posts) for t in self.threads)

    def thread(self, thread_id: str) -> Thread:
        for t in self.threads:
            if t.thread_id == thread_id:
                return t
        raise KeyError(thread_id)

    def learner_index(self) -> dict:
        return {u: i for i, u in enumerate(self.learners)}

    def word_index(self) -> dict:
        return {w: i for i, w in enumerate(self.vocabulary)}


@dataclass(frozen=True)
class ReplyAnnotation:
    recipients: Mapping[str, frozenset]
    first_post_index: Mapping[tuple, int]


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset = DEFAULT_STOPWORDS
    min_count: int = 10
    max_doc_frac: float = 0.10
    lowercase: bool = True


def load_preprocess_config(path) -> PreprocessConfig:
    """Read ``stopwords``, ``min_count`` and ``max_doc_frac`` from a key-value file.

    A relative stopword path is resolved against the config file's directory.
    The stopword file holds whitespace-separated words.
    """
    from .config import read_kv_file

    path = Path(path)
    kv = read_kv_file(path)
    stop = DEFAULT_STOPWORDS
    if "stopwords" in kv:
        sw_path = Path(kv["stopwords"])
        if not sw_path.is_absolute():
            sw_path = path.parent / sw_path
        stop = frozenset(w.lower() for w in sw_path.read_text().split())
    return PreprocessConfig(
        stopwords=stop,
        min_count=int(kv.get("min_count", 10)),
        max_doc_frac=float(kv.get("max_doc_frac", 0.10)),
        lowercase=kv.get("lowercase", "true").lower() in ("1", "true", "yes"),
    )


def clean_tokens(raw: str, lowercase: bool = True) -> list:
    """Strip URLs, non-ascii characters, punctuation and digit-bearing words."""
    text = _URL_RE.sub(" ", raw)
    text = text.encode("ascii", errors="ignore").decode("ascii")
    if lowercase:
        text = text.lower()
    tokens = []
    for tok in _WORD_RE.findall(text):
        tok = tok.strip("'_")
        if not tok or any(c.isdigit() for c in tok):
            continue
        tokens.append(tok.replace("'", ""))
    return tokens


def preprocess_text(raw: str, config: PreprocessConfig = PreprocessConfig()) -> list:
    """First-pass preprocessing of one post; corpus-wide frequency filters are
    applied afterwards by :func:`preprocess_corpus`."""
    return [t for t in clean_tokens(raw, config.lowercase) if t not in config.stopwords]


def frequency_filter(docs: Iterable[Iterable[str]], min_count: int, max_doc_frac: float) -> set:
    """Words kept after dropping rare words and words present in too many documents."""
    docs = [list(d) for d in docs]
    total = Counter()
    doc_freq = Counter()
    for d in docs:
        total.update(d)
        doc_freq.update(set(d))
    n_docs = max(len(docs), 1)
    return {
        w for w, c in total.items()
        if c >= min_count and doc_freq[w] / n_docs <= max_doc_frac
    }


def _thread_from_posts(thread_id: str, posts: list) -> Thread:
    counts = Counter()
    for p in posts:
        counts.update(p.tokens)
    return Thread(thread_id, tuple(posts), dict(sorted(counts.items())))


def preprocess_corpus(corpus: ForumCorpus, config: PreprocessConfig = PreprocessConfig()) -> ForumCorpus:
    """Re-tokenize every post from its raw text and apply the corpus-wide filters.

    Document frequencies are counted per thread.
    """
    per_post = {
        (t.thread_id, p.post_id): preprocess_text(p.text, config)
        for t in corpus.threads
        for p in t.posts
    }
    thread_docs = [
        [w for p in t.posts for w in per_post[t.thread_id, p.post_id]] for t in corpus.threads
    ]
    keep = frequency_filter(thread_docs, config.min_count, config.max_doc_frac)
    threads = []
    for t in corpus.threads:
        posts = [
            replace(p, tokens=tuple(w for w in per_post[t.thread_id, p.post_id] if w in keep))
            for p in t.posts
        ]
        threads.append(_thread_from_posts(t.thread_id, posts))
    return replace(corpus, threads=tuple(threads), vocabulary=tuple(sorted(keep)))


def build_corpus(
    threads: Mapping[str, list] | Iterable[tuple],
    learners: Iterable[str] | None = None,
    horizon: float | None = None,
    vocabulary: Iterable[str] | None = None,
    metadata: Mapping | None = None,
) -> ForumCorpus:
    """Assemble and validate a corpus from ``thread_id -> [Post, ...]``.

    Posts are sorted by time; tokens default to :func:`clean_tokens` of the text.
    """
    items = threads.items() if isinstance(threads, Mapping) else threads
    built = []
    seen_learners = set()
    all_tokens = set()
    max_time = 0.0
    for thread_id, posts in items:
        posts = sorted(posts, key=lambda p: p.time)
        if not posts:
            raise CorpusStructureError(f"thread {thread_id!r} has no posts")
        ids = {}
        prev_time = None
        fixed = []
        for p in posts:
            if p.time < 0:
                raise CorpusStructureError(f"post {p.post_id!r} has negative time")
            if prev_time is not None and p.time <= prev_time:
                raise CorpusStructureError(
                    f"posts in thread {thread_id!r} share timestamp {p.time}"
                )
            if p.parent_post_id is not None:
                parent_time = ids.get(p.parent_post_id)
                if parent_time is None:
                    raise CorpusStructureError(
                        f"post {p.post_id!r} references unknown or later parent "
                        f"{p.parent_post_id!r}"
                    )
            if p.post_id in ids:
                raise CorpusStructureError(f"duplicate post id {p.post_id!r}")
            ids[p.post_id] = p.time
            prev_time = p.time
            if p.thread_id != thread_id:
                p = replace(p, thread_id=thread_id)
            if not p.tokens and p.text:
                p = replace(p, tokens=tuple(clean_tokens(p.text)))
            if p.learner is not None:
                seen_learners.add(p.learner)
            all_tokens.update(p.tokens)
            max_time = max(max_time, p.time)
            fixed.append(p)
        built.append(_thread_from_posts(thread_id, fixed))

    if learners is None:
        learners = sorted(seen_learners)
    else:
        learners = list(learners)
        missing = seen_learners - set(learners)
        if missing:
            raise CorpusStructureError(f"posts by undeclared learners: {sorted(missing)[:5]}")
    if vocabulary is None:
        vocabulary = sorted(all_tokens)
    else:
        vocabulary = list(vocabulary)
        extra = all_tokens - set(vocabulary)
        if extra:
            raise CorpusStructureError(f"tokens outside vocabulary: {sorted(extra)[:5]}")
    if horizon is None:
        horizon = max_time
    elif max_time > horizon:
        raise CorpusStructureError(f"post time {max_time} beyond horizon {horizon}")
    return ForumCorpus(
        threads=tuple(built),
        learners=tuple(learners),
        vocabulary=tuple(vocabulary),
        horizon=float(horizon),
        metadata=dict(metadata or {}),
    )


def _parse_post(rec: dict, thread_id: str, line_no: int) -> Post:
    try:
        time = float(rec["time"])
        post_id = str(rec["post_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusFormatError(line_no, f"bad post record: {exc}") from None
    if time < 0:
        raise CorpusFormatError(line_no, f"negative timestamp {time}")
    learner = rec.get("learner")
    parent = rec.get("parent_post_id")
    return Post(
        post_id=post_id,
        thread_id=thread_id,
        learner=None if learner is None else str(learner),
        time=time,
        text=rec.get("text") or "",
        parent_post_id=None if parent is None else str(parent),
        mentions=frozenset(str(m) for m in rec.get("mentions") or ()),
    )


def ingest_corpus(
    path,
    format: str = "jsonl",
    horizon: float | None = None,
    preprocess: PreprocessConfig | None = None,
) -> ForumCorpus:
    """Read a JSONL corpus.

    Without ``preprocess`` the posts are tokenized by :func:`clean_tokens` only;
    pass a :class:`PreprocessConfig` to apply stopwords and frequency filters.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    threads = []
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(line_no, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise CorpusFormatError(line_no, "expected a JSON object")
            if "corpus" in rec:
                meta = dict(rec["corpus"])
                continue
            if "thread_id" not in rec or not isinstance(rec.get("posts"), list):
                raise CorpusFormatError(line_no, "record needs 'thread_id' and a 'posts' list")
            tid = str(rec["thread_id"])
            threads.append((tid, [_parse_post(p, tid, line_no) for p in rec["posts"]]))
    if not threads:
        raise EmptyCorpusError(f"{path}: no threads")
    if horizon is None:
        horizon = meta.get("horizon")
    corpus = build_corpus(
        threads,
        learners=meta.get("learners"),
        horizon=horizon,
        vocabulary=None if preprocess is not None else meta.get("vocabulary"),
        metadata=meta.get("metadata", {}),
    )
    if preprocess is not None:
        corpus = preprocess_corpus(corpus, preprocess)
    return corpus


def write_corpus(corpus: ForumCorpus, path) -> None:
    """Write ``corpus`` as JSONL with a leading metadata line."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "horizon": corpus.horizon,
            "learners": list(corpus.learners),
            "vocabulary": list(corpus.vocabulary),
            "metadata": dict(corpus.metadata),
        }
        fh.write(json.dumps({"corpus": header}) + "\n")
        for t in corpus.threads:
            rec = {
                "thread_id": t.thread_id,
                "posts": [
                    {
                        "post_id": p.post_id,
                        "learner": p.learner,
                        "time": p.time,
                        "text": p.text,
                        "parent_post_id": p.parent_post_id,
                        "mentions": sorted(p.mentions),
                    }
                    for p in t.posts
                ],
            }
            fh.write(json.dumps(rec) + "\n")


def extract_reply_annotations(corpus: ForumCorpus) -> ReplyAnnotation:
    """Explicit-reply recipients and first-post indices.

    A post replies explicitly to the author of an earlier post when it mentions
    that author or is the first comment nested under that post.  Anonymous
    authors neither send nor receive explicit replies, and nobody replies to
    themselves.
    """
    recipients = {}
    first_index = {}
    for t in corpus.threads:
        authors = {p.post_id: p.learner for p in t.posts}
        first_comment = {}
        for p in t.posts:
            if p.parent_post_id is not None and p.parent_post_id not in first_comment:
                first_comment[p.parent_post_id] = p.post_id
        first_comment_of = {c: parent for parent, c in first_comment.items()}
        earlier_authors = set()
        for i, p in enumerate(t.posts):
            rec = set()
            if p.learner is not None:
                rec.update(m for m in p.mentions if m in earlier_authors)
                parent = first_comment_of.get(p.post_id)
                if parent is not None and authors[parent] is not None:
                    rec.add(authors[parent])
                rec.discard(p.learner)
                key = (p.learner, t.thread_id)
                if key not in first_index:
                    first_index[key] = i
                earlier_authors.add(p.learner)
            recipients[p.post_id] = frozenset(rec)
    return ReplyAnnotation(recipients=recipients, first_post_index=first_index)
