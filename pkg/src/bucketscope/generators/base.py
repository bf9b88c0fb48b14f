from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Iterator, Protocol

from ..names import is_legal

MAX_ATTEMPTS = 100


class GeneratorStarvation(RuntimeError):
    """No acceptable candidate within the attempt budget."""


class EmptyTrainingSet(ValueError):
    pass


class NameModel(Protocol):
    kind: ClassVar[str]

    def sample(self, rng: random.Random) -> str: ...


def draw(
    model: NameModel,
    rng: random.Random,
    accept: Callable[[str], bool] | None = None,
    attempts: int = MAX_ATTEMPTS,
) -> str:
    """Sample until a legal (and accepted) candidate appears."""
    for _ in range(attempts):
        candidate = model.sample(rng)
        if is_legal(candidate) and (accept is None or accept(candidate)):
            return candidate
    raise GeneratorStarvation(f"{model.kind}: no acceptable candidate in {attempts} draws")


@dataclass
class CandidateStream:
    """Reproducible stream of legal candidates from one model."""

    model: NameModel
    seed: int
    emitted: int = 0
    _rng: random.Random = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._rng = random.Random(self.seed)

    def __iter__(self) -> Iterator[str]:
        return self

    def __next__(self) -> str:
        candidate = draw(self.model, self._rng)
        self.emitted += 1
        return candidate

    def take(self, n: int) -> list[str]:
        return [next(self) for _ in range(n)]
