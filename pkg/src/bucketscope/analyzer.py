"""Token decomposition, guessability and naming-pattern extraction.

A name is tiled into corpus-matched substrings and random gaps. The tiling
chosen is the one with the fewest estimated guesses, where

    guesses = k! * prod(rank of each corpus token) * prod(39 ** len(random token))

and ``k`` is the number of tokens. The ``k!`` factor is the pattern-arity
correction: it penalises long tilings and is applied inside the minimisation,
so adding corpus entries can only lower a name's estimate.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, TextIO

from .corpus import CorpusKind, CorpusSet
from .names import ALPHABET, check_name

ALPHABET_SIZE = len(ALPHABET)
MIN_MATCH_LENGTH = 2


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int
    kind: CorpusKind | None = None
    rank: int | None = None

    @property
    def is_random(self) -> bool:
        return self.kind is None

    @property
    def token_class(self) -> str:
        return "random" if self.kind is None else "corpus"

    def guesses(self) -> int:
        if self.kind is None:
            return ALPHABET_SIZE ** len(self.text)
        return self.rank


@dataclass(frozen=True)
class TokenDecomposition:
    name: str
    tokens: tuple[Token, ...]
    log10_guesses: float
    shannon_entropy_bits: float

    @property
    def guesses(self) -> int:
        return tiling_cost(self.tokens)

    @property
    def census_log10_guesses(self) -> float:
        """Guess estimate with random tokens counted as 10**length.

        This is the reporting convention used for pattern tables, where a
        random token of length 18 reports 18.0.
        """
        product = 1
        for tok in self.tokens:
            product *= 10 ** len(tok.text) if tok.kind is None else tok.rank
        return math.log10(_combine(len(self.tokens), product))


def _combine(k: int, product: int) -> int:
    return math.factorial(k) * product


def tiling_cost(tokens: Sequence[Token]) -> int:
    product = 1
    for tok in tokens:
        product *= tok.guesses()
    return _combine(len(tokens), product)


def _matches(name: str, corpora: CorpusSet) -> list[list[tuple[int, int, CorpusKind]]]:
    n = len(name)
    symbols = corpora.corpora.get(CorpusKind.symbol)
    prefixes = corpora.prefixes
    match = corpora.match
    out: list[list[tuple[int, int, CorpusKind]]] = [[] for _ in range(n)]
    for i in range(n):
        found = out[i]
        if symbols is not None and name[i] in symbols:
            found.append((i + 1, 1, CorpusKind.symbol))
        j = i + MIN_MATCH_LENGTH
        if name[i:j - 1] not in prefixes:
            continue
        while j <= n:
            sub = name[i:j]
            hit = match(sub)
            if hit is not None:
                found.append((j, hit[0], hit[1]))
            if sub not in prefixes:
                break
            j += 1
    return out


def best_tiling(name: str, corpora: CorpusSet) -> tuple[Token, ...]:
    """Minimum-cost tiling by dynamic programming over (position, token count).

    Random gaps are kept maximal: a random token is never followed directly by
    another random token.
    """
    n = len(name)
    if n == 0:
        return ()
    matches = _matches(name, corpora)
    # state key: (token_count, in_random); value: cost
    cost: list[dict[tuple[int, bool], int]] = [dict() for _ in range(n + 1)]
    back: list[dict[tuple[int, bool], tuple]] = [dict() for _ in range(n + 1)]
    cost[0][(0, False)] = 1
    for i in range(n):
        here = cost[i]
        if not here:
            continue
        nxt = cost[i + 1]
        nxt_back = back[i + 1]
        for (k, in_random), c in here.items():
            key = (k, True) if in_random else (k + 1, True)
            rc = c * ALPHABET_SIZE
            old = nxt.get(key)
            if old is None or rc < old:
                nxt[key] = rc
                nxt_back[key] = (i, (k, in_random), None)
            for j, rank, kind in matches[i]:
                key = (k + 1, False)
                mc = c * rank
                slot = cost[j]
                old = slot.get(key)
                if old is None or mc < old:
                    slot[key] = mc
                    back[j][key] = (i, (k, in_random), (rank, kind))
    best_key = None
    best_cost = None
    for key, c in cost[n].items():
        total = _combine(key[0], c)
        if best_cost is None or total < best_cost:
            best_cost, best_key = total, key
    tokens: list[Token] = []
    pos, key = n, best_key
    run_end = None
    while pos > 0:
        prev_pos, prev_key, hit = back[pos][key]
        if hit is not None:
            tokens.append(Token(name[prev_pos:pos], prev_pos, pos, hit[1], hit[0]))
        else:
            if run_end is None:
                run_end = pos
            if not prev_key[1]:
                tokens.append(Token(name[prev_pos:run_end], prev_pos, run_end))
                run_end = None
        pos, key = prev_pos, prev_key
    tokens.reverse()
    return tuple(tokens)


def estimate_guesses(decomposition: TokenDecomposition | Sequence[Token]) -> float:
    """log10 of the estimated guess count for a decomposition."""
    tokens = decomposition.tokens if isinstance(decomposition, TokenDecomposition) else decomposition
    return math.log10(tiling_cost(tokens))


def shannon_entropy(name: str) -> float:
    """Per-character histogram entropy times length, in bits."""
    if not name:
        raise ValueError("entropy of an empty name is undefined")
    n = len(name)
    per_char = 0.0
    for count in Counter(name).values():
        p = count / n
        per_char -= p * math.log2(p)
    return per_char * n


def decompose(name: str, corpora: CorpusSet) -> TokenDecomposition:
    check_name(name)
    tokens = best_tiling(name, corpora)
    return TokenDecomposition(name, tokens, estimate_guesses(tokens), shannon_entropy(name))


@dataclass(frozen=True)
class NamingPattern:
    elements: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.elements)

    def __str__(self) -> str:
        return "(" + ",".join(self.elements) + ")"

    @classmethod
    def parse(cls, text: str) -> "NamingPattern":
        text = text.strip()
        if not (text.startswith("(") and text.endswith(")")):
            raise ValueError(f"not a pattern: {text!r}")
        body = text[1:-1]
        return cls(tuple(part.strip() for part in body.split(",")) if body else ())


PATTERN_DETAILS = ("class", "kind", "anchored", "length")


def extract_pattern(decomposition: TokenDecomposition, detail: str = "class") -> NamingPattern:
    """Project a decomposition onto rand/corpus elements.

    ``detail`` keeps more information: ``kind`` names the corpus kind,
    ``anchored`` keeps corpus tokens as quoted literals and ``length``
    annotates random tokens with their length.
    """
    if detail not in PATTERN_DETAILS:
        raise ValueError(f"detail must be one of {PATTERN_DETAILS}")
    elements = []
    for tok in decomposition.tokens:
        if tok.kind is None:
            elements.append(f"rand[{len(tok.text)}]" if detail == "length" else "rand")
        elif detail == "kind":
            elements.append(f"corpus:{tok.kind.value}")
        elif detail == "anchored":
            elements.append(json.dumps(tok.text))
        else:
            elements.append("corpus")
    return NamingPattern(tuple(elements))


@dataclass(frozen=True)
class CensusRow:
    pattern: NamingPattern
    count: int
    share: float
    mean_log10_guesses: float


def pattern_census(
    decompositions: Iterable[TokenDecomposition], detail: str = "class"
) -> list[CensusRow]:
    """Share of names per pattern with the mean census guess estimate."""
    counts: Counter[NamingPattern] = Counter()
    sums: dict[NamingPattern, float] = defaultdict(float)
    total = 0
    for d in decompositions:
        pattern = extract_pattern(d, detail)
        counts[pattern] += 1
        sums[pattern] += d.census_log10_guesses
        total += 1
    if total == 0:
        raise ValueError("pattern census needs at least one decomposition")
    rows = [
        CensusRow(p, c, c / total, sums[p] / c)
        for p, c in counts.items()
    ]
    rows.sort(key=lambda r: (-r.count, str(r.pattern)))
    return rows


# -- line-delimited records -------------------------------------------------


def to_record(d: TokenDecomposition) -> dict:
    return {
        "name": d.name,
        "tokens": [
            {
                "text": t.text,
                "start": t.start,
                "end": t.end,
                "class": t.token_class,
                "kind": None if t.kind is None else t.kind.value,
                "rank": t.rank,
            }
            for t in d.tokens
        ],
        "log10_guesses": d.log10_guesses,
        "census_log10_guesses": d.census_log10_guesses,
        "entropy_bits": d.shannon_entropy_bits,
        "pattern": str(extract_pattern(d)),
    }


def from_record(record: dict) -> TokenDecomposition:
    tokens = tuple(
        Token(
            t["text"],
            t["start"],
            t["end"],
            None if t["kind"] is None else CorpusKind(t["kind"]),
            t["rank"],
        )
        for t in record["tokens"]
    )
    return TokenDecomposition(record["name"], tokens, record["log10_guesses"], record["entropy_bits"])


def write_records(decompositions: Iterable[TokenDecomposition], fh: TextIO) -> int:
    n = 0
    for d in decompositions:
        fh.write(json.dumps(to_record(d), sort_keys=True) + "\n")
        n += 1
    return n


def read_records(fh: TextIO) -> Iterator[TokenDecomposition]:
    for line in fh:
        if line.strip():
            yield from_record(json.loads(line))
