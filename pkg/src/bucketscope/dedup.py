"""Exact, persistent set of every name ever generated or extracted."""

from __future__ import annotations

import os
import threading
from pathlib import Path
from typing import Iterable, Iterator


class DedupStore:
    """Append-only log on disk mirrored by an in-memory set.

    ``add`` is an atomic insert-if-absent; a name, once present, stays present.
    With ``path=None`` the store lives in memory only.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._names: set[str] = set()
        self._order: list[str] = []
        self._lock = threading.Lock()
        self._fh = None
        if self.path is not None:
            if self.path.exists():
                for name in self.replay(self.path):
                    if name not in self._names:
                        self._names.add(name)
                        self._order.append(name)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")

    @staticmethod
    def replay(path: str | Path) -> Iterator[str]:
        """Every logged name in insertion order (a torn final line is ignored)."""
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.endswith("\n") and line.strip():
                    yield line.rstrip("\n")

    def add(self, name: str) -> bool:
        with self._lock:
            if name in self._names:
                return False
            self._names.add(name)
            self._order.append(name)
            if self._fh is not None:
                self._fh.write(name + "\n")
            return True

    def add_many(self, names: Iterable[str]) -> int:
        return sum(1 for n in names if self.add(n))

    def __contains__(self, name: object) -> bool:
        return name in self._names

    def __len__(self) -> int:
        return len(self._names)

    def names(self) -> list[str]:
        return list(self._order)

    def flush(self) -> None:
        if self._fh is not None:
            with self._lock:
                self._fh.flush()
                os.fsync(self._fh.fileno())

    def truncate(self, count: int) -> None:
        """Forget everything after the first ``count`` names (checkpoint rollback)."""
        with self._lock:
            dropped = self._order[count:]
            del self._order[count:]
            self._names.difference_update(dropped)
            if self.path is not None:
                self._fh.close()
                tmp = self.path.with_suffix(self.path.suffix + ".tmp")
                tmp.write_text("".join(n + "\n" for n in self._order), encoding="utf-8")
                os.replace(tmp, self.path)
                self._fh = open(self.path, "a", encoding="utf-8")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "DedupStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
