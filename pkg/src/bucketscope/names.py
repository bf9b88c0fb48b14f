"""Bucket-name legality shared by every module."""

from __future__ import annotations

import re
import string

DELIMITERS = "-_."
ALPHANUMERIC = string.ascii_lowercase + string.digits
# 26 letters, 10 digits, 3 delimiters
ALPHABET = ALPHANUMERIC + DELIMITERS

MIN_LENGTH = 3
MAX_LENGTH = 64

_LEGAL = re.compile(r"[a-z0-9._-]{%d,%d}" % (MIN_LENGTH, MAX_LENGTH))


class InvalidNameError(ValueError):
    """Raised when a string cannot be a bucket name."""


def is_legal(name: str) -> bool:
    return _LEGAL.fullmatch(name) is not None


def check_name(name: str) -> str:
    if not MIN_LENGTH <= len(name) <= MAX_LENGTH:
        raise InvalidNameError(f"{name!r}: length {len(name)} outside {MIN_LENGTH}-{MAX_LENGTH}")
    bad = sorted({c for c in name if c not in ALPHABET})
    if bad:
        raise InvalidNameError(f"{name!r}: illegal characters {''.join(bad)!r}")
    return name
