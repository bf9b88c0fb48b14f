"""Character-class PCFG: rules such as ``C4N4-C4-N1-`` plus per-class terminals."""

from __future__ import annotations

import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from .base import EmptyTrainingSet
from .freq import FrequencyTable

_RUNS = re.compile(r"[a-z]+|[0-9]+|.", re.DOTALL)
_RULE = re.compile(r"([CN])(\d+)|([^CN0-9])")


def char_pcfg_rule(name: str) -> str:
    """Letter runs become ``C<len>``, digit runs ``N<len>``; anything else is literal."""
    out = []
    for run in _RUNS.findall(name):
        if run[0].isdigit():
            out.append(f"N{len(run)}")
        elif "a" <= run[0] <= "z":
            out.append(f"C{len(run)}")
        else:
            out.append(run)
    return "".join(out)


@lru_cache(maxsize=65536)
def parse_rule(rule: str) -> tuple[tuple[bool, str], ...]:
    """Split a rule into (is_class, text) parts, e.g. ``C4-`` -> ((True,'C4'), (False,'-'))."""
    parts = []
    pos = 0
    for m in _RULE.finditer(rule):
        if m.start() != pos:
            raise ValueError(f"malformed rule {rule!r}")
        pos = m.end()
        if m.group(3) is not None:
            parts.append((False, m.group(3)))
        else:
            if int(m.group(2)) < 1:
                raise ValueError(f"malformed rule {rule!r}")
            parts.append((True, m.group(1) + m.group(2)))
    if pos != len(rule):
        raise ValueError(f"malformed rule {rule!r}")
    return tuple(parts)


@dataclass
class CharPcfgModel:
    kind = "char_pcfg"

    rules: FrequencyTable[str]
    terminals: dict[str, FrequencyTable[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for rule in self.rules.items:
            for is_class, text in parse_rule(rule):
                if is_class and text not in self.terminals:
                    raise ValueError(f"rule {rule!r} references empty class {text}")

    def sample(self, rng: random.Random) -> str:
        rule = self.rules.sample(rng)
        return "".join(
            self.terminals[text].sample(rng) if is_class else text
            for is_class, text in parse_rule(rule)
        )


def train_char_pcfg(names: Sequence[str]) -> CharPcfgModel:
    if not names:
        raise EmptyTrainingSet("char PCFG needs at least one name")
    rules: Counter[str] = Counter()
    terminals: dict[str, Counter[str]] = defaultdict(Counter)
    for name in names:
        rules[char_pcfg_rule(name)] += 1
        for run in _RUNS.findall(name):
            if run[0].isdigit():
                terminals[f"N{len(run)}"][run] += 1
            elif "a" <= run[0] <= "z":
                terminals[f"C{len(run)}"][run] += 1
    return CharPcfgModel(
        FrequencyTable(rules),
        {cls: FrequencyTable(c) for cls, c in terminals.items()},
    )


def sample_char_pcfg(model: CharPcfgModel, rng: random.Random) -> str:
    return model.sample(rng)
