"""Token-level bigram generator over delimiter-split names."""

from __future__ import annotations

import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from ..names import DELIMITERS
from .base import EmptyTrainingSet
from .freq import FrequencyTable

_SPLIT = re.compile("([" + re.escape(DELIMITERS) + "])")


def tokenize_on_delimiters(name: str) -> tuple[list[str], list[str]]:
    """Split on ``- _ .``; empty segments between delimiters are kept."""
    parts = _SPLIT.split(name)
    return parts[0::2], parts[1::2]


def join_tokens(tokens: Sequence[str], delimiters: Sequence[str]) -> str:
    if len(delimiters) != max(len(tokens) - 1, 0):
        raise ValueError("need exactly one delimiter between consecutive tokens")
    out = [tokens[0]] if tokens else []
    for delim, tok in zip(delimiters, tokens[1:]):
        out.append(delim)
        out.append(tok)
    return "".join(out)


@dataclass
class TokenBigramModel:
    kind = "token_bigram"

    first: FrequencyTable[str]
    transitions: dict[str, FrequencyTable[str]]
    unigram: FrequencyTable[str]
    token_counts: FrequencyTable[int]
    delimiters: FrequencyTable[str] | None

    def probability(self, token: str, successor: str) -> float:
        table = self.transitions.get(token)
        return 0.0 if table is None else table.probability(successor)

    def sample(self, rng: random.Random) -> str:
        n = self.token_counts.sample(rng)
        tokens = [self.first.sample(rng)]
        for _ in range(n - 1):
            # a token never seen with a successor backs off to the unigram table
            table = self.transitions.get(tokens[-1], self.unigram)
            tokens.append(table.sample(rng))
        delims = [self.delimiters.sample(rng) for _ in range(n - 1)] if n > 1 else []
        return join_tokens(tokens, delims)


def train_token_bigram(names: Sequence[str]) -> TokenBigramModel:
    if not names:
        raise EmptyTrainingSet("token bigram needs at least one name")
    first: Counter[str] = Counter()
    unigram: Counter[str] = Counter()
    pairs: dict[str, Counter[str]] = defaultdict(Counter)
    counts: Counter[int] = Counter()
    delims: Counter[str] = Counter()
    for name in names:
        tokens, ds = tokenize_on_delimiters(name)
        first[tokens[0]] += 1
        unigram.update(tokens)
        counts[len(tokens)] += 1
        delims.update(ds)
        for a, b in zip(tokens, tokens[1:]):
            pairs[a][b] += 1
    return TokenBigramModel(
        FrequencyTable(first),
        {tok: FrequencyTable(c) for tok, c in pairs.items()},
        FrequencyTable(unigram),
        FrequencyTable(counts),
        FrequencyTable(delims) if delims else None,
    )


def sample_token_bigram(model: TokenBigramModel, rng: random.Random) -> str:
    return model.sample(rng)
