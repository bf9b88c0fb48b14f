"""Synthetic ground-truth bucket namespace for offline pipeline runs."""

from __future__ import annotations

import bisect
import hashlib
import itertools
import json
import math
import random
import re
import struct
import threading
import zlib
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterator, TextIO

import yaml

from .analyzer import decompose, extract_pattern
from .corpus import CorpusKind, CorpusSet, default_corpora
from .names import ALPHANUMERIC, MAX_LENGTH, is_legal
from .security import AclRecord, FileMeta, Grant, Grantee, _data, default_categories
from .validation import Provider

SHARE_TOLERANCE = 1e-6
ATTEMPTS_PER_NAME = 20_000
UNCATEGORIZED = "uncategorized"
ACL_FIELDS = ("readable", "list", "read_objects", "write_objects", "delete_objects", "change_permissions")

# Keys that the bundled sensitive-pattern set flags.
SENSITIVE_KEYS = (
    "backup/db.sql",
    "config/.env",
    "keys/id_rsa",
    "deploy/credentials.json",
    "site/wp-config.php",
    "data/app.sqlite",
    "ops/terraform.tfstate",
    "home/.bash_history",
)


class SpecError(ValueError):
    pass


class CapacityError(ValueError):
    """More distinct names requested than the templates can produce."""


# -- templates ---------------------------------------------------------------------

_RAND_RE = re.compile(r"rand(?:\[(\d+)(?:-(\d+))?\])?$")


@dataclass(frozen=True)
class Slot:
    kind: str  # "rand", "corpus" or "literal"
    lengths: tuple[int, int] | None = None  # fixed-length random slots
    corpus_kind: str | None = None
    text: str | None = None

    @property
    def pooled(self) -> bool:
        return self.kind == "rand" and self.lengths is None

    @property
    def pattern_class(self) -> str:
        return "rand" if self.kind == "rand" else "corpus"


@dataclass(frozen=True)
class Template:
    text: str
    slots: tuple[Slot, ...]

    @classmethod
    def parse(cls, text: str) -> "Template":
        body = text.strip()
        if not (body.startswith("(") and body.endswith(")")) or len(body) < 3:
            raise SpecError(f"template must look like (elem,...): {text!r}")
        slots = []
        for part in _split_elements(body[1:-1]):
            if part.startswith('"'):
                try:
                    literal = json.loads(part)
                except json.JSONDecodeError as exc:
                    raise SpecError(f"bad literal {part!r} in {text!r}") from exc
                if not literal:
                    raise SpecError(f"empty literal in {text!r}")
                slots.append(Slot("literal", text=literal))
            elif part == "corpus" or part.startswith("corpus:"):
                kind = part.partition(":")[2] or None
                if kind is not None and kind not in CorpusKind.__members__:
                    raise SpecError(f"unknown corpus kind {kind!r} in {text!r}")
                slots.append(Slot("corpus", corpus_kind=kind))
            else:
                m = _RAND_RE.match(part)
                if not m:
                    raise SpecError(f"unknown template element {part!r} in {text!r}")
                lengths = None
                if m.group(1):
                    lo = int(m.group(1))
                    hi = int(m.group(2) or lo)
                    if not 1 <= lo <= hi <= MAX_LENGTH:
                        raise SpecError(f"bad random length range in {text!r}")
                    lengths = (lo, hi)
                slots.append(Slot("rand", lengths=lengths))
        for a, b in zip(slots, slots[1:]):
            if a.kind == b.kind == "rand":
                raise SpecError(f"adjacent random slots merge into one token: {text!r}")
        return cls(text, tuple(slots))

    @property
    def pattern(self) -> str:
        """The class-level naming pattern every name from this template must have."""
        return "(" + ",".join(s.pattern_class for s in self.slots) + ")"


def _split_elements(body: str) -> list[str]:
    parts, buf, quoted = [], [], False
    for ch in body:
        if ch == '"':
            quoted = not quoted
        if ch == "," and not quoted:
            parts.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf).strip())
    return parts


# -- spec --------------------------------------------------------------------------


@dataclass
class PoolSpec:
    size: int = 4000
    min_length: int = 4
    max_length: int = 9
    zipf: float = 0.8
    reuse: float = 0.6


def _default_acl() -> dict:
    zero = {f: 0.0 for f in ACL_FIELDS}
    return {p.value: {"public": dict(zero), "private": dict(zero)} for p in Provider}


@dataclass
class NamespaceSpec:
    size: int
    pattern_mix: list[tuple[str, float]]
    public_share: float = 0.13
    providers: dict[str, float] = field(default_factory=lambda: {"aws": 1.0})
    acl: dict[str, dict[str, dict[str, float]]] = field(default_factory=_default_acl)
    categories: list[tuple[str, float]] = field(default_factory=lambda: [(UNCATEGORIZED, 1.0)])
    corpus_mix: dict[str, float] = field(default_factory=lambda: {"dictionary": 1.0})
    corpus_zipf: float = 1.0
    pool: PoolSpec = field(default_factory=PoolSpec)
    rand_lengths: tuple[int, int] = (4, 12)
    website_share: float = 0.0
    sensitive_share: float = 0.0
    max_files: int = 40

    def __post_init__(self) -> None:
        self.pattern_mix = [(str(t), float(s)) for t, s in self.pattern_mix]
        self.categories = [(str(c), float(s)) for c, s in self.categories]
        self.rand_lengths = tuple(self.rand_lengths)
        if isinstance(self.pool, dict):
            self.pool = PoolSpec(**self.pool)

    def validate(self) -> None:
        if self.size < 0:
            raise SpecError("size must be non-negative")
        _check_shares("pattern_mix", [s for _, s in self.pattern_mix])
        _check_shares("providers", list(self.providers.values()))
        _check_shares("categories", [s for _, s in self.categories])
        _check_shares("corpus_mix", list(self.corpus_mix.values()))
        for p in self.providers:
            if p not in Provider.__members__:
                raise SpecError(f"unknown provider {p!r}")
        for k in self.corpus_mix:
            if k not in CorpusKind.__members__:
                raise SpecError(f"unknown corpus kind {k!r}")
        known = {c.name for c in default_categories()} | {UNCATEGORIZED}
        for c, _ in self.categories:
            if c not in known:
                raise SpecError(f"unknown category {c!r}")
        for name in ("public_share", "website_share", "sensitive_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SpecError(f"{name} must be within [0, 1]")
        for provider, states in self.acl.items():
            for state, probs in states.items():
                for key, p in probs.items():
                    if key not in ACL_FIELDS or not 0.0 <= p <= 1.0:
                        raise SpecError(f"bad acl entry {provider}.{state}.{key}={p}")
        lo, hi = self.rand_lengths
        if not 1 <= lo <= hi <= MAX_LENGTH:
            raise SpecError("bad rand_lengths")
        if self.pool.size < 0 or not 1 <= self.pool.min_length <= self.pool.max_length:
            raise SpecError("bad pool spec")
        if self.max_files < 1:
            raise SpecError("max_files must be at least 1")
        for text, _ in self.pattern_mix:
            Template.parse(text)

    def templates(self) -> list[Template]:
        return [Template.parse(t) for t, _ in self.pattern_mix]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["patterns"] = [list(p) for p in data.pop("pattern_mix")]
        data["categories"] = [list(c) for c in self.categories]
        data["rand_lengths"] = list(self.rand_lengths)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "NamespaceSpec":
        data = dict(data)
        if "patterns" in data:
            data["pattern_mix"] = data.pop("patterns")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise SpecError(f"unknown spec keys {sorted(unknown)}")
        try:
            spec = cls(**data)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc
        spec.validate()
        return spec

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def with_size(self, size: int) -> "NamespaceSpec":
        return NamespaceSpec.from_dict({**self.to_dict(), "size": size})


def _check_shares(label: str, shares: list[float]) -> None:
    if not shares:
        raise SpecError(f"{label} is empty")
    if any(s < 0 for s in shares):
        raise SpecError(f"{label} has a negative share")
    if abs(math.fsum(shares) - 1.0) > SHARE_TOLERANCE:
        raise SpecError(f"{label} shares sum to {math.fsum(shares):.8f}, not 1")


def load_spec(path: str | Path) -> NamespaceSpec:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise SpecError(f"{path}: expected a mapping")
    return NamespaceSpec.from_dict(data)


def dump_spec(spec: NamespaceSpec, fh: TextIO) -> None:
    yaml.safe_dump(spec.to_dict(), fh, sort_keys=False)


def default_spec() -> NamespaceSpec:
    return load_spec(_data("namespace_default.yaml"))


# -- namespace ---------------------------------------------------------------------

_PROVIDERS = tuple(Provider)
_PUBLIC = 4
_WEBSITE = 8


@dataclass(frozen=True)
class NamespaceEntry:
    name: str
    provider: Provider
    state: str  # "public" or "private"
    website: bool
    acl: AclRecord | None
    files: tuple[FileMeta, ...]


class SyntheticNamespace:
    """Immutable name -> (provider, state) table; ACLs and files derive lazily from the seed."""

    def __init__(self, spec: NamespaceSpec, seed: int, codes: dict[str, int]) -> None:
        self.spec = spec
        self.seed = seed
        self._codes = codes

    def __len__(self) -> int:
        return len(self._codes)

    def __contains__(self, name: object) -> bool:
        return name in self._codes

    def names(self) -> list[str]:
        return sorted(self._codes)

    def lookup(self, name: str) -> tuple[Provider, str, bool] | None:
        code = self._codes.get(name)
        if code is None:
            return None
        return _PROVIDERS[code & 3], "public" if code & _PUBLIC else "private", bool(code & _WEBSITE)

    def entry(self, name: str) -> NamespaceEntry:
        hit = self.lookup(name)
        if hit is None:
            raise KeyError(name)
        provider, state, website = hit
        rng = random.Random(f"{self.seed}:{name}")
        acl = _draw_acl(rng, self.spec, provider, state)
        files = _draw_files(rng, self.spec) if state == "public" else ()
        return NamespaceEntry(name, provider, state, website, acl, files)

    def entries(self) -> Iterator[NamespaceEntry]:
        for name in self.names():
            yield self.entry(name)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SyntheticNamespace):
            return NotImplemented
        return self.seed == other.seed and self._codes == other._codes and (
            self.spec.canonical_json() == other.spec.canonical_json()
        )


def _zipf_cumulative(n: int, exponent: float) -> list[float]:
    return list(itertools.accumulate(1.0 / (r ** exponent) for r in range(1, n + 1)))


def _pick(rng: random.Random, items: list, cum: list[float]):
    return items[bisect.bisect_right(cum, rng.random() * cum[-1])]


def _allocate(size: int, shares: list[float]) -> list[int]:
    """Largest-remainder apportionment: counts sum to ``size`` and track shares exactly."""
    raw = [size * s for s in shares]
    counts = [math.floor(r) for r in raw]
    order = sorted(range(len(shares)), key=lambda i: (counts[i] - raw[i], i))
    for i in order[: size - sum(counts)]:
        counts[i] += 1
    return counts


class _Filler:
    """Draws slot fillers: random strings, recurring pool tokens and Zipf-weighted words."""

    def __init__(self, spec: NamespaceSpec, corpora: CorpusSet, rng: random.Random) -> None:
        self.spec = spec
        self.corpora = corpora
        self.rng = rng
        self.kinds = list(spec.corpus_mix)
        self.kind_cum = list(itertools.accumulate(spec.corpus_mix.values()))
        self.words: dict[str, list[str]] = {}
        self.word_cum: dict[str, list[float]] = {}
        for kind in CorpusKind:
            if kind in corpora and kind is not CorpusKind.symbol:
                entries = list(corpora[kind].entries)
                self.words[kind.value] = entries
                self.word_cum[kind.value] = _zipf_cumulative(len(entries), spec.corpus_zipf)
        self.pool = self._build_pool()
        self.pool_cum = _zipf_cumulative(len(self.pool), spec.pool.zipf) if self.pool else []

    def _is_random(self, token: str) -> bool:
        return str(extract_pattern(decompose(token, self.corpora))) == "(rand)"

    def _build_pool(self) -> list[str]:
        pool: list[str] = []
        seen = set()
        p = self.spec.pool
        attempts = 0
        while len(pool) < p.size:
            attempts += 1
            if attempts > p.size * 50:
                raise CapacityError("cannot fill the recurring random-token pool")
            token = self.fresh(self.rng.randint(p.min_length, p.max_length))
            if token in seen or not is_legal(token) or not self._is_random(token):
                continue
            seen.add(token)
            pool.append(token)
        return pool

    def fresh(self, length: int) -> str:
        return "".join(self.rng.choices(ALPHANUMERIC, k=length))

    def fill(self, slot: Slot) -> str:
        if slot.kind == "literal":
            return slot.text
        if slot.kind == "corpus":
            kind = slot.corpus_kind or _pick(self.rng, self.kinds, self.kind_cum)
            return _pick(self.rng, self.words[kind], self.word_cum[kind])
        if slot.lengths is not None:
            return self.fresh(self.rng.randint(*slot.lengths))
        if self.pool and self.rng.random() < self.spec.pool.reuse:
            return _pick(self.rng, self.pool, self.pool_cum)
        return self.fresh(self.rng.randint(*self.spec.rand_lengths))


def template_capacity(template: Template, spec: NamespaceSpec, corpora: CorpusSet) -> int:
    """Upper bound on distinct names a template can yield."""
    total = 1
    for slot in template.slots:
        if slot.kind == "literal":
            continue
        if slot.kind == "corpus":
            kinds = [slot.corpus_kind] if slot.corpus_kind else list(spec.corpus_mix)
            total *= sum(len(corpora[CorpusKind(k)]) for k in kinds if CorpusKind(k) in corpora)
        else:
            lo, hi = slot.lengths or spec.rand_lengths
            n = sum(len(ALPHANUMERIC) ** k for k in range(lo, hi + 1))
            if slot.pooled:
                n += spec.pool.size
            total *= n
    return total


def build_namespace(
    spec: NamespaceSpec, seed: int, corpora: CorpusSet | None = None
) -> SyntheticNamespace:
    """Draw ``spec.size`` distinct legal names whose decomposed pattern equals their template's."""
    spec.validate()
    corpora = corpora or default_corpora()
    rng = random.Random(seed)
    templates = spec.templates()
    counts = _allocate(spec.size, [s for _, s in spec.pattern_mix])
    for tpl, n in zip(templates, counts):
        if n > template_capacity(tpl, spec, corpora):
            raise CapacityError(f"template {tpl.text} cannot produce {n} distinct names")
    filler = _Filler(spec, corpora, rng)
    order = [i for i, n in enumerate(counts) for _ in range(n)]
    rng.shuffle(order)

    providers = [Provider(p) for p in spec.providers]
    provider_cum = list(itertools.accumulate(spec.providers.values()))
    codes: dict[str, int] = {}
    rejected: set[str] = set()
    for idx in order:
        tpl = templates[idx]
        target = tpl.pattern
        for _ in range(ATTEMPTS_PER_NAME):
            name = "".join(filler.fill(s) for s in tpl.slots)
            if name in codes or name in rejected:
                continue
            if is_legal(name) and str(extract_pattern(decompose(name, corpora))) == target:
                break
            rejected.add(name)
        else:
            raise CapacityError(f"template {tpl.text} exhausted after {ATTEMPTS_PER_NAME} draws")
        provider = _pick(rng, providers, provider_cum)
        public = rng.random() < spec.public_share
        website = (not public) and provider is Provider.alibaba and rng.random() < spec.website_share
        codes[name] = _PROVIDERS.index(provider) | (_PUBLIC if public else 0) | (_WEBSITE if website else 0)
    return SyntheticNamespace(spec, seed, codes)


# -- lazily drawn per-entry detail ------------------------------------------------------


def _draw_acl(rng: random.Random, spec: NamespaceSpec, provider: Provider, state: str) -> AclRecord | None:
    probs = spec.acl.get(provider.value, {}).get(state, {})
    if rng.random() >= probs.get("readable", 0.0):
        return None
    granted = {a for a in ACL_FIELDS[1:] if rng.random() < probs.get(a, 0.0)}
    return acl_from_actions(provider, granted)


def acl_from_actions(provider: Provider, actions: set[str]) -> AclRecord:
    """Express public-grantee actions in the provider's own ACL vocabulary."""
    everyone = Grantee.all_users
    if provider is Provider.aws:
        grants = [Grant(Grantee.specific, "full_control")]
        if "list" in actions:
            grants.append(Grant(everyone, "read"))
        # object-level reads have no bucket-ACL grant; WRITE covers write and delete
        if actions & {"write_objects", "delete_objects"}:
            grants.append(Grant(everyone, "write"))
        if "change_permissions" in actions:
            grants.append(Grant(everyone, "write_acp"))
        return AclRecord(tuple(grants), "aws")
    if provider is Provider.gcp:
        perms = {
            "list": "storage.objects.list",
            "read_objects": "storage.objects.get",
            "write_objects": "storage.objects.create",
            "delete_objects": "storage.objects.delete",
            "change_permissions": "storage.buckets.setiampolicy",
        }
        return AclRecord(tuple(Grant(everyone, perms[a]) for a in ACL_FIELDS[1:] if a in actions), "gcp")
    if actions & {"write_objects", "delete_objects"}:
        canned = "public-read-write"
    elif actions & {"list", "read_objects"}:
        canned = "public-read"
    else:
        canned = "private"
    return AclRecord((Grant(everyone, canned),), "alibaba")


_EPOCH = datetime(2010, 1, 1)


def _draw_files(rng: random.Random, spec: NamespaceSpec) -> tuple[FileMeta, ...]:
    names = [c for c, _ in spec.categories]
    category = _pick(rng, names, list(itertools.accumulate(s for _, s in spec.categories)))
    if category == "users.txt":
        keys = ["users.txt"]
    else:
        keywords = []
        for cat in default_categories():
            if cat.name == category:
                keywords = sorted(cat.keywords)
        keys = []
        for i in range(rng.randint(1, spec.max_files)):
            stem = "".join(rng.choices(ALPHANUMERIC, k=8))
            if not keywords:
                keys.append(f"{stem[:3]}x/{stem}{i}.dat")
                continue
            kw = rng.choice(keywords)
            if kw.isalnum() and len(kw) <= 5:
                keys.append(f"{stem[:3]}x/{stem}{i}.{kw}")
            else:
                keys.append(f"{kw}/{stem}{i}.dat")
    if rng.random() < spec.sensitive_share:
        keys[rng.randrange(len(keys))] = rng.choice(SENSITIVE_KEYS)
    files = []
    for key in dict.fromkeys(keys):
        etag = hashlib.md5(f"{key}:{rng.random()}".encode()).hexdigest()
        modified = _EPOCH + timedelta(seconds=rng.randrange(10 * 365 * 86400))
        files.append(FileMeta(key, rng.randint(0, 10_000_000), etag, modified))
    return tuple(files)


# -- probing ---------------------------------------------------------------------------


def oracle_probe(namespace: SyntheticNamespace, name: str, provider: Provider | str) -> tuple[int, bool]:
    """Status code and listability the synthetic cloud answers with."""
    hit = namespace.lookup(name)
    if hit is None or hit[0] is not Provider(provider):
        return 404, False
    _, state, website = hit
    if state == "public":
        return 200, True
    if website:
        return 200, False
    return 403, False


class SyntheticBackend:
    """Probe backend answering from a synthetic namespace; counts every probe."""

    def __init__(self, namespace: SyntheticNamespace) -> None:
        self.namespace = namespace
        self.probes = 0
        self._lock = threading.Lock()

    def probe(self, name: str, provider: Provider) -> tuple[int, bool]:
        with self._lock:
            self.probes += 1
        return oracle_probe(self.namespace, name, provider)

    def inspect(self, name: str, provider: Provider) -> tuple[AclRecord | None, list[FileMeta]]:
        hit = self.namespace.lookup(name)
        if hit is None or hit[0] is not Provider(provider):
            return None, []
        entry = self.namespace.entry(name)
        return entry.acl, list(entry.files)


# -- persistence -----------------------------------------------------------------------

MAGIC = b"BSNS"
VERSION = 1
_HEADER = struct.Struct(">4sHHqII")


class NamespaceFormatError(ValueError):
    pass


def dumps(namespace: SyntheticNamespace) -> bytes:
    """Versioned binary image; entries sorted by name, so equal namespaces give equal bytes."""
    lines = [namespace.spec.canonical_json()]
    lines.extend(f"{name}\t{namespace._codes[name]}" for name in namespace.names())
    payload = zlib.compress("\n".join(lines).encode("utf-8"), 6)
    header = _HEADER.pack(MAGIC, VERSION, 0, namespace.seed, len(namespace), zlib.crc32(payload))
    return header + payload


def loads(blob: bytes) -> SyntheticNamespace:
    if len(blob) < _HEADER.size:
        raise NamespaceFormatError("truncated header")
    magic, version, _, seed, count, crc = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise NamespaceFormatError("not a namespace file")
    if version != VERSION:
        raise NamespaceFormatError(f"unsupported namespace format version {version}")
    payload = blob[_HEADER.size:]
    if zlib.crc32(payload) != crc:
        raise NamespaceFormatError("payload corrupt")
    lines = zlib.decompress(payload).decode("utf-8").split("\n")
    spec = NamespaceSpec.from_dict(json.loads(lines[0]))
    codes = {}
    for line in lines[1:]:
        name, _, code = line.partition("\t")
        codes[name] = int(code)
    if len(codes) != count:
        raise NamespaceFormatError("entry count mismatch")
    return SyntheticNamespace(spec, seed, codes)


def save_namespace(namespace: SyntheticNamespace, path: str | Path) -> None:
    Path(path).write_bytes(dumps(namespace))


def load_namespace(path: str | Path) -> SyntheticNamespace:
    return loads(Path(path).read_bytes())


def dump_sample(namespace: SyntheticNamespace, fh: TextIO, limit: int = 100) -> int:
    """Evenly spaced TSV sample of entries, with their ACL and file summary."""
    names = namespace.names()
    if not names:
        return 0
    step = max(1, len(names) // limit)
    fh.write("name\tprovider\tstate\twebsite\tacl\tfiles\n")
    n = 0
    for name in names[::step][:limit]:
        e = namespace.entry(name)
        acl = "-" if e.acl is None else ";".join(f"{g.grantee.value}:{g.permission}" for g in e.acl.grants)
        fh.write(f"{name}\t{e.provider.value}\t{e.state}\t{int(e.website)}\t{acl}\t{len(e.files)}\n")
        n += 1
    return n
