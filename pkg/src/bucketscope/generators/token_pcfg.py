"""Token PCFG: templates of corpus-typed tokens, e.g. ``<other>-<dictionary word>``."""

from __future__ import annotations

import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from ..analyzer import best_tiling
from ..corpus import CorpusKind, CorpusSet
from .base import EmptyTrainingSet
from .freq import FrequencyTable

TYPE_NAMES = {
    CorpusKind.dictionary: "dictionary word",
    CorpusKind.file_extension: "file extension",
    CorpusKind.tech_term: "tech term",
    CorpusKind.domain: "domain",
    CorpusKind.password: "password",
    CorpusKind.human_name: "name",
}
OTHER = "other"
NUMBER = "number"

_TEMPLATE = re.compile(r"<([^<>]+)>|([^<>])")


def typed_tokens(name: str, corpora: CorpusSet) -> list[tuple[str | None, str]]:
    """(type, text) per decomposed token; type is None for literal symbols."""
    out: list[tuple[str | None, str]] = []
    for tok in best_tiling(name, corpora):
        if tok.kind is CorpusKind.symbol:
            out.append((None, tok.text))
        elif tok.kind is not None:
            out.append((TYPE_NAMES[tok.kind], tok.text))
        elif tok.text.isdigit():
            out.append((NUMBER, tok.text))
        else:
            out.append((OTHER, tok.text))
    return out


def render_template(parts: Sequence[tuple[str | None, str]]) -> str:
    return "".join(text if kind is None else f"<{kind}>" for kind, text in parts)


def token_pcfg_template(name: str, corpora: CorpusSet) -> str:
    return render_template(typed_tokens(name, corpora))


@lru_cache(maxsize=65536)
def parse_template(template: str) -> tuple[tuple[bool, str], ...]:
    parts = []
    pos = 0
    for m in _TEMPLATE.finditer(template):
        if m.start() != pos:
            raise ValueError(f"malformed template {template!r}")
        pos = m.end()
        parts.append((True, m.group(1)) if m.group(1) is not None else (False, m.group(2)))
    if pos != len(template):
        raise ValueError(f"malformed template {template!r}")
    return tuple(parts)


@dataclass
class TokenPcfgModel:
    kind = "token_pcfg"

    templates: FrequencyTable[str]
    token_tables: dict[str, FrequencyTable[str]]

    def __post_init__(self) -> None:
        for template in self.templates.items:
            for is_type, text in parse_template(template):
                if is_type and text not in self.token_tables:
                    raise ValueError(f"template {template!r} references empty type <{text}>")

    def sample(self, rng: random.Random) -> str:
        template = self.templates.sample(rng)
        return "".join(
            self.token_tables[text].sample(rng) if is_type else text
            for is_type, text in parse_template(template)
        )


class TemplateCache:
    """Memoised ``typed_tokens`` for repeated retraining on a growing name set."""

    def __init__(self, corpora: CorpusSet) -> None:
        self.corpora = corpora
        self._cache: dict[str, list[tuple[str | None, str]]] = {}

    def __call__(self, name: str) -> list[tuple[str | None, str]]:
        parts = self._cache.get(name)
        if parts is None:
            parts = self._cache[name] = typed_tokens(name, self.corpora)
        return parts


def train_token_pcfg(
    names: Sequence[str], corpora: CorpusSet, cache: TemplateCache | None = None
) -> TokenPcfgModel:
    if not names:
        raise EmptyTrainingSet("token PCFG needs at least one name")
    typed = cache if cache is not None else TemplateCache(corpora)
    templates: Counter[str] = Counter()
    tables: dict[str, Counter[str]] = defaultdict(Counter)
    for name in names:
        parts = typed(name)
        templates[render_template(parts)] += 1
        for kind, text in parts:
            if kind is not None:
                tables[kind][text] += 1
    return TokenPcfgModel(
        FrequencyTable(templates),
        {kind: FrequencyTable(c) for kind, c in tables.items()},
    )


def sample_token_pcfg(model: TokenPcfgModel, rng: random.Random) -> str:
    return model.sample(rng)
