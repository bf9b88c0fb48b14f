"""Ranked word corpora used for token matching and guess estimation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .names import DELIMITERS


class CorpusKind(str, enum.Enum):
    dictionary = "dictionary"
    domain = "domain"
    tech_term = "tech_term"
    file_extension = "file_extension"
    password = "password"
    human_name = "human_name"
    symbol = "symbol"


# Rank ties across corpora resolve in this order.
KIND_PRIORITY = (
    CorpusKind.dictionary,
    CorpusKind.tech_term,
    CorpusKind.domain,
    CorpusKind.password,
    CorpusKind.human_name,
    CorpusKind.file_extension,
    CorpusKind.symbol,
)
_PRIORITY = {kind: i for i, kind in enumerate(KIND_PRIORITY)}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Corpus:
    """One ranked word list. ``entries`` is ordered most frequent first."""

    kind: CorpusKind
    entries: tuple[str, ...]
    _ranks: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        ranks: dict[str, int] = {}
        for token in self.entries:
            ranks.setdefault(token, len(ranks) + 1)
        object.__setattr__(self, "_ranks", ranks)

    @classmethod
    def from_tokens(cls, kind: CorpusKind | str, tokens: Iterable[str]) -> "Corpus":
        kind = CorpusKind(kind)
        seen: dict[str, None] = {}
        for raw in tokens:
            token = raw.strip().lower()
            if not token:
                raise CorpusError(f"{kind.value} corpus: empty entry")
            seen.setdefault(token, None)
        return cls(kind, tuple(seen))

    def rank(self, token: str) -> int | None:
        if self.kind is CorpusKind.symbol:
            # all symbols are equally likely
            return 1 if token in self._ranks else None
        return self._ranks.get(token)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: object) -> bool:
        return token in self._ranks

    def append(self, token: str) -> "Corpus":
        """Copy of this corpus with ``token`` added at the lowest rank."""
        return Corpus.from_tokens(self.kind, (*self.entries, token))


def symbol_corpus() -> Corpus:
    return Corpus(CorpusKind.symbol, tuple(DELIMITERS))


def load_corpus(path: str | Path, kind: CorpusKind | str) -> Corpus:
    """Read a one-token-per-line list; line i gets rank i.

    Blank lines are skipped and later duplicates dropped. Any line that is not
    valid UTF-8 rejects the whole file.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    tokens = []
    for lineno, line in enumerate(raw.split(b"\n"), start=1):
        try:
            text = line.decode("utf-8").strip()
        except UnicodeDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: not valid UTF-8") from exc
        if text:
            tokens.append(text)
    if not tokens:
        raise CorpusError(f"{path}: empty corpus")
    return Corpus.from_tokens(kind, tokens)


class CorpusSet:
    """At most one corpus per kind, queried as one merged lookup table."""

    def __init__(self, corpora: Iterable[Corpus] = ()) -> None:
        self.corpora: dict[CorpusKind, Corpus] = {}
        for corpus in corpora:
            if corpus.kind in self.corpora:
                raise CorpusError(f"duplicate corpus kind {corpus.kind.value}")
            self.corpora[corpus.kind] = corpus
        self._best: dict[str, tuple[int, CorpusKind]] = {}
        for kind in sorted(self.corpora, key=_PRIORITY.__getitem__):
            corpus = self.corpora[kind]
            for token in corpus.entries:
                rank = corpus.rank(token)
                current = self._best.get(token)
                if current is None or rank < current[0]:
                    self._best[token] = (rank, kind)
        self.lengths = tuple(sorted({len(t) for t in self._best}))
        # every proper prefix of every token, so scans can stop early
        self.prefixes = frozenset(t[:i] for t in self._best for i in range(1, len(t)))

    @property
    def total_size(self) -> int:
        return sum(len(c) for c in self.corpora.values())

    def lookup(self, token: str) -> tuple[CorpusKind, int] | None:
        hit = self._best.get(token.lower())
        if hit is None:
            return None
        return hit[1], hit[0]

    def match(self, token: str) -> tuple[int, CorpusKind] | None:
        """Raw (rank, kind) lookup without lowercasing; hot path for decompose."""
        return self._best.get(token)

    def with_corpus(self, corpus: Corpus) -> "CorpusSet":
        corpora = dict(self.corpora)
        corpora[corpus.kind] = corpus
        return CorpusSet(corpora.values())

    def __contains__(self, kind: object) -> bool:
        return kind in self.corpora

    def __getitem__(self, kind: CorpusKind) -> Corpus:
        return self.corpora[kind]

    def __len__(self) -> int:
        return len(self.corpora)


def lookup(corpora: CorpusSet, token: str) -> tuple[CorpusKind, int] | None:
    if not token:
        raise ValueError("lookup token must be non-empty")
    return corpora.lookup(token)


def load_manifest(path: str | Path, *, with_symbols: bool = True) -> CorpusSet:
    """Load every corpus named in a ``kind = path`` manifest."""
    path = Path(path)
    corpora = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CorpusError(f"{path}:{lineno}: expected 'kind = path'")
        kind, target = (part.strip() for part in line.split("=", 1))
        try:
            kind = CorpusKind(kind)
        except ValueError:
            raise CorpusError(f"{path}:{lineno}: unknown corpus kind {kind!r}") from None
        target_path = Path(target)
        if not target_path.is_absolute():
            target_path = path.parent / target_path
        corpora.append(load_corpus(target_path, kind))
    if with_symbols and not any(c.kind is CorpusKind.symbol for c in corpora):
        corpora.append(symbol_corpus())
    return CorpusSet(corpora)


def bundled_manifest() -> Path:
    return Path(str(resources.files("bucketscope") / "data" / "corpora" / "manifest.txt"))


_DEFAULT: CorpusSet | None = None


def default_corpora() -> CorpusSet:
    """The bundled corpus set (zxcvbn-derived lists plus curated cloud terms)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_manifest(bundled_manifest())
    return _DEFAULT
