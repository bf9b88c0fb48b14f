"""Versioned binary container for trained models.

Layout (all integers big-endian)::

    offset  size  field
    0       4     magic  b"BSGM"
    4       2     format version (currently 1)
    6       1     kind tag: 1 char_ngram, 2 token_bigram, 3 char_pcfg, 4 token_pcfg
    7       1     reserved, zero
    8       4     payload length in bytes
    12      4     CRC-32 of the payload
    16      ...   payload: zlib-compressed UTF-8 JSON

The JSON payload holds raw frequency tables as ``[[item, count], ...]`` lists
in sampling order, so a reloaded model samples identically.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from typing import Any, TextIO

from .char_ngram import CharNGramModel
from .char_pcfg import CharPcfgModel
from .freq import FrequencyTable
from .token_bigram import TokenBigramModel
from .token_pcfg import TokenPcfgModel

MAGIC = b"BSGM"
VERSION = 1
_HEADER = struct.Struct(">4sHBBII")
KIND_TAGS = {"char_ngram": 1, "token_bigram": 2, "char_pcfg": 3, "token_pcfg": 4}
_TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}

Model = CharNGramModel | TokenBigramModel | CharPcfgModel | TokenPcfgModel


class ModelFormatError(ValueError):
    pass


def _t(table: FrequencyTable) -> list:
    return [[item, count] for item, count in zip(table.items, table.counts)]


def _ft(pairs: list) -> FrequencyTable:
    return FrequencyTable({item: count for item, count in pairs})


def _ft_int(pairs: list) -> FrequencyTable:
    return FrequencyTable({int(item): count for item, count in pairs})


def to_tables(model: Model) -> dict[str, Any]:
    if isinstance(model, CharNGramModel):
        return {
            "order": model.order,
            "lengths": _t(model.lengths),
            "tables": [[[ctx, _t(tab)] for ctx, tab in level.items()] for level in model.tables],
        }
    if isinstance(model, TokenBigramModel):
        return {
            "first": _t(model.first),
            "transitions": [[tok, _t(tab)] for tok, tab in model.transitions.items()],
            "unigram": _t(model.unigram),
            "token_counts": _t(model.token_counts),
            "delimiters": None if model.delimiters is None else _t(model.delimiters),
        }
    if isinstance(model, CharPcfgModel):
        return {
            "rules": _t(model.rules),
            "terminals": [[cls, _t(tab)] for cls, tab in model.terminals.items()],
        }
    if isinstance(model, TokenPcfgModel):
        return {
            "templates": _t(model.templates),
            "token_tables": [[kind, _t(tab)] for kind, tab in model.token_tables.items()],
        }
    raise TypeError(f"not a model: {type(model).__name__}")


def from_tables(kind: str, data: dict[str, Any]) -> Model:
    if kind == "char_ngram":
        return CharNGramModel(
            data["order"],
            [{ctx: _ft(pairs) for ctx, pairs in level} for level in data["tables"]],
            _ft_int(data["lengths"]),
        )
    if kind == "token_bigram":
        return TokenBigramModel(
            _ft(data["first"]),
            {tok: _ft(pairs) for tok, pairs in data["transitions"]},
            _ft(data["unigram"]),
            _ft_int(data["token_counts"]),
            None if data["delimiters"] is None else _ft(data["delimiters"]),
        )
    if kind == "char_pcfg":
        return CharPcfgModel(_ft(data["rules"]), {c: _ft(p) for c, p in data["terminals"]})
    if kind == "token_pcfg":
        return TokenPcfgModel(_ft(data["templates"]), {k: _ft(p) for k, p in data["token_tables"]})
    raise ModelFormatError(f"unknown model kind {kind!r}")


def dumps(model: Model) -> bytes:
    payload = zlib.compress(json.dumps(to_tables(model), separators=(",", ":")).encode("utf-8"))
    header = _HEADER.pack(MAGIC, VERSION, KIND_TAGS[model.kind], 0, len(payload), zlib.crc32(payload))
    return header + payload


def loads(blob: bytes) -> Model:
    if len(blob) < _HEADER.size:
        raise ModelFormatError("truncated header")
    magic, version, tag, _, length, crc = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ModelFormatError("not a model file")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    if tag not in _TAG_KINDS:
        raise ModelFormatError(f"unknown kind tag {tag}")
    payload = blob[_HEADER.size:_HEADER.size + length]
    if len(payload) != length or zlib.crc32(payload) != crc:
        raise ModelFormatError("payload truncated or corrupt")
    return from_tables(_TAG_KINDS[tag], json.loads(zlib.decompress(payload)))


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_bytes(dumps(model))


def load_model(path: str | Path) -> Model:
    return loads(Path(path).read_bytes())


def dump_text(model: Model, fh: TextIO, limit: int | None = None) -> None:
    """Human-readable frequency tables, most frequent first."""
    fh.write(f"# model {model.kind} (format v{VERSION})\n")
    for section, table in _sections(model):
        fh.write(f"\n## {section} (total {table.total})\n")
        ranked = sorted(zip(table.items, table.counts), key=lambda ic: -ic[1])
        for item, count in ranked[:limit]:
            fh.write(f"{item}\t{count}\t{count / table.total:.6f}\n")


def _sections(model: Model):
    if isinstance(model, CharNGramModel):
        yield "lengths", model.lengths
        for ctx, table in model.transitions.items():
            yield f"next char after {ctx!r}", table
    elif isinstance(model, TokenBigramModel):
        yield "token counts", model.token_counts
        if model.delimiters is not None:
            yield "delimiters", model.delimiters
        yield "first token", model.first
        for tok, table in model.transitions.items():
            yield f"successors of {tok!r}", table
    elif isinstance(model, CharPcfgModel):
        yield "rules", model.rules
        for cls, table in model.terminals.items():
            yield f"terminals {cls}", table
    else:
        yield "templates", model.templates
        for kind, table in model.token_tables.items():
            yield f"tokens <{kind}>", table
