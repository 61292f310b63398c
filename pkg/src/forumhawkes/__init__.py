"""Point-process models of discussion-forum posting with thread recommendation."""

from .forumdata import (
    ForumCorpus,
    Post,
    PreprocessConfig,
    ReplyAnnotation,
    Thread,
    extract_reply_annotations,
    ingest_corpus,
    preprocess_corpus,
    write_corpus,
)
from .inference import GibbsSampler, PosteriorEstimate, SamplerConfig, run_gibbs
from .ppcore import ExcitationClass, ModelParams

__version__ = "0.1.0"
