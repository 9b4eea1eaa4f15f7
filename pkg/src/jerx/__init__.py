"""Joint named-entity and relation extraction with a BIOES tagging head and
a deep biaffine relation scorer."""

from .config import Config
from .corpus import (
    AnnotatedSentence,
    EntitySpan,
    LabelVocab,
    RelationAnnotation,
    Token,
    decode_bioes,
    encode_bioes,
    load_corpus,
    make_folds,
    save_corpus,
    sentence,
)
from .encoder import EncodedSentence, FileBackedEncoder, TokenVocab
from .evaluation import PRF, aggregate_cv, overall_score, score_ner, score_re
from .model import Model, load_checkpoint, save_checkpoint
from .relation import RelationCandidate, biaffine_score, build_candidates
from .training import lambda_schedule, train, train_step

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence",
    "Config",
    "EncodedSentence",
    "EntitySpan",
    "FileBackedEncoder",
    "LabelVocab",
    "Model",
    "PRF",
    "RelationAnnotation",
    "RelationCandidate",
    "Token",
    "TokenVocab",
    "aggregate_cv",
    "biaffine_score",
    "build_candidates",
    "decode_bioes",
    "encode_bioes",
    "lambda_schedule",
    "load_checkpoint",
    "load_corpus",
    "make_folds",
    "overall_score",
    "save_checkpoint",
    "save_corpus",
    "score_ner",
    "score_re",
    "sentence",
    "train",
    "train_step",
]
