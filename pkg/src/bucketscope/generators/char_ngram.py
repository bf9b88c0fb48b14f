"""Character-level n-gram generator with recursive backoff."""

from __future__ import annotations

import random
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .base import EmptyTrainingSet
from .freq import FrequencyTable

START = "^"


@dataclass
class CharNGramModel:
    """Next-character tables for every context length 0..order-1.

    ``tables[c]`` maps a context of length ``c`` to the distribution of the
    following character; the longest tables are the n-gram proper, the
    shorter ones exist only for backoff.
    """

    kind = "char_ngram"

    order: int
    tables: list[dict[str, FrequencyTable[str]]]
    lengths: FrequencyTable[int]

    @property
    def transitions(self) -> dict[str, FrequencyTable[str]]:
        return self.tables[self.order - 1]

    def probability(self, context: str, char: str) -> float:
        """P(char | context), using the table for ``len(context)``."""
        if len(context) > self.order - 1:
            context = context[len(context) - (self.order - 1):]
        table = self.tables[len(context)].get(context)
        return 0.0 if table is None else table.probability(char)

    def next_char(self, context: str, rng: random.Random) -> str:
        for c in range(self.order - 1, -1, -1):
            table = self.tables[c].get(context[len(context) - c:] if c else "")
            if table is not None:
                return table.sample(rng)
        raise AssertionError("unigram table missing")  # pragma: no cover

    def sample(self, rng: random.Random) -> str:
        length = self.lengths.sample(rng)
        context = START * (self.order - 1)
        out = []
        for _ in range(length):
            ch = self.next_char(context, rng)
            out.append(ch)
            context = context[1:] + ch if self.order > 1 else ""
        return "".join(out)


def train_char_ngram(names: Sequence[str], order: int = 5) -> CharNGramModel:
    if order < 2:
        raise ValueError("order must be at least 2")
    if not names:
        raise EmptyTrainingSet("char n-gram needs at least one name")
    counts: list[dict[str, Counter]] = [defaultdict(Counter) for _ in range(order)]
    pad = START * (order - 1)
    for name in names:
        padded = pad + name
        for t in range(order - 1, len(padded)):
            ch = padded[t]
            for c in range(order):
                counts[c][padded[t - c:t]][ch] += 1
    tables = [{ctx: FrequencyTable(counter) for ctx, counter in level.items()} for level in counts]
    return CharNGramModel(order, tables, FrequencyTable(Counter(len(n) for n in names)))


def sample_char_ngram(model: CharNGramModel, rng: random.Random) -> str:
    return model.sample(rng)
