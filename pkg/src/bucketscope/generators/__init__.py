"""Statistical bucket-name generators sharing a train/sample interface."""

from __future__ import annotations

from typing import Sequence

from ..corpus import CorpusSet, default_corpora
from .base import CandidateStream, EmptyTrainingSet, GeneratorStarvation, draw
from .char_ngram import CharNGramModel, sample_char_ngram, train_char_ngram
from .char_pcfg import CharPcfgModel, char_pcfg_rule, sample_char_pcfg, train_char_pcfg
from .freq import FrequencyTable
from .serialize import dump_text, load_model, save_model
from .token_bigram import (
    TokenBigramModel,
    sample_token_bigram,
    tokenize_on_delimiters,
    train_token_bigram,
)
from .token_pcfg import (
    TemplateCache,
    TokenPcfgModel,
    sample_token_pcfg,
    token_pcfg_template,
    train_token_pcfg,
)

MODEL_KINDS = ("char_ngram", "token_bigram", "char_pcfg", "token_pcfg")


def train(
    kind: str,
    names: Sequence[str],
    corpora: CorpusSet | None = None,
    order: int = 5,
    cache: TemplateCache | None = None,
):
    if kind == "char_ngram":
        return train_char_ngram(names, order)
    if kind == "token_bigram":
        return train_token_bigram(names)
    if kind == "char_pcfg":
        return train_char_pcfg(names)
    if kind == "token_pcfg":
        return train_token_pcfg(names, corpora or default_corpora(), cache)
    raise ValueError(f"unknown generator kind {kind!r}; choose from {MODEL_KINDS}")


def structure_of(kind: str, name: str, corpora: CorpusSet | None = None):
    """The top-level structure a model samples first: length, token count, rule or template."""
    if kind == "char_ngram":
        return len(name)
    if kind == "token_bigram":
        return len(tokenize_on_delimiters(name)[0])
    if kind == "char_pcfg":
        return char_pcfg_rule(name)
    if kind == "token_pcfg":
        return token_pcfg_template(name, corpora or default_corpora())
    raise ValueError(f"unknown generator kind {kind!r}")


__all__ = [
    "MODEL_KINDS",
    "CandidateStream",
    "CharNGramModel",
    "CharPcfgModel",
    "EmptyTrainingSet",
    "FrequencyTable",
    "GeneratorStarvation",
    "TemplateCache",
    "TokenBigramModel",
    "TokenPcfgModel",
    "char_pcfg_rule",
    "draw",
    "dump_text",
    "load_model",
    "sample_char_ngram",
    "sample_char_pcfg",
    "sample_token_bigram",
    "sample_token_pcfg",
    "save_model",
    "structure_of",
    "token_pcfg_template",
    "tokenize_on_delimiters",
    "train",
    "train_char_ngram",
    "train_char_pcfg",
    "train_token_bigram",
    "train_token_pcfg",
]
