"""Frequency tables with O(log n) seeded sampling."""

from __future__ import annotations

import random
from bisect import bisect_right
from collections import Counter
from typing import Generic, Hashable, Iterable, Mapping, TypeVar

K = TypeVar("K", bound=Hashable)


class FrequencyTable(Generic[K]):
    """Observed counts; iteration order is first-seen order and drives sampling."""

    __slots__ = ("items", "counts", "total", "_cum")

    def __init__(self, counts: Mapping[K, int]) -> None:
        self.items: list[K] = []
        self.counts: list[int] = []
        for item, count in counts.items():
            if count <= 0:
                raise ValueError(f"non-positive count for {item!r}")
            self.items.append(item)
            self.counts.append(int(count))
        if not self.items:
            raise ValueError("empty frequency table")
        self._cum: list[int] = []
        running = 0
        for c in self.counts:
            running += c
            self._cum.append(running)
        self.total = running

    @classmethod
    def from_iterable(cls, values: Iterable[K]) -> "FrequencyTable[K]":
        return cls(Counter(values))

    def sample(self, rng: random.Random) -> K:
        return self.items[bisect_right(self._cum, rng.random() * self.total)]

    def probability(self, item: K) -> float:
        try:
            return self.counts[self.items.index(item)] / self.total
        except ValueError:
            return 0.0

    def probabilities(self) -> dict[K, float]:
        return {item: c / self.total for item, c in zip(self.items, self.counts)}

    def as_dict(self) -> dict[K, int]:
        return dict(zip(self.items, self.counts))

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item: object) -> bool:
        return item in self.items

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        return self.items == other.items and self.counts == other.counts

    def __repr__(self) -> str:
        return f"FrequencyTable({len(self.items)} items, total={self.total})"
