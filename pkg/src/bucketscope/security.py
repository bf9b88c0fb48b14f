"""ACL misconfiguration flags, sensitive filenames and bucket categories."""

from __future__ import annotations

import enum
import fnmatch
import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, TextIO

PUBLIC_WRITE = "public_write"
PUBLIC_DELETE = "public_delete"
PUBLIC_ACL_CHANGE = "public_acl_change"
SENSITIVE_CONTENT = "sensitive_content"
ACL_FLAGS = (PUBLIC_WRITE, PUBLIC_DELETE, PUBLIC_ACL_CHANGE)

ACTIONS = ("list", "read_objects", "write_objects", "delete_objects", "change_permissions")
_ACTION_FLAGS = {
    "write_objects": PUBLIC_WRITE,
    "delete_objects": PUBLIC_DELETE,
    "change_permissions": PUBLIC_ACL_CHANGE,
}


def _data(name: str) -> Path:
    return Path(str(resources.files("bucketscope") / "data" / name))


class Grantee(str, enum.Enum):
    all_users = "all_users"
    authenticated_users = "authenticated_users"
    specific = "specific"


PUBLIC_GRANTEES = frozenset({Grantee.all_users, Grantee.authenticated_users})


class AclNormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class Grant:
    grantee: Grantee
    permission: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "grantee", Grantee(self.grantee))
        object.__setattr__(self, "permission", self.permission.strip().lower())


@dataclass(frozen=True)
class AclRecord:
    """Grants in the provider's own vocabulary (AWS: read, write, read_acp, write_acp, full_control)."""

    grants: tuple[Grant, ...] = ()
    provider: str = "aws"

    def with_grant(self, grant: Grant) -> "AclRecord":
        return AclRecord((*self.grants, grant), self.provider)

    def to_dict(self) -> dict:
        return {
            "provider": self.provider,
            "grants": [[g.grantee.value, g.permission] for g in self.grants],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AclRecord":
        return cls(tuple(Grant(g, p) for g, p in data["grants"]), data["provider"])


def load_acl_table(path: str | Path | None = None) -> dict[tuple[str, str], frozenset[str]]:
    path = Path(path) if path is not None else _data("acl_normalization.tsv")
    table: dict[tuple[str, str], frozenset[str]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 2:
            raise AclNormalizationError(f"{path}:{lineno}: expected provider<TAB>permission<TAB>actions")
        actions = frozenset(a.strip() for a in (fields[2] if len(fields) > 2 else "").split(",") if a.strip())
        unknown = actions - set(ACTIONS)
        if unknown:
            raise AclNormalizationError(f"{path}:{lineno}: unknown actions {sorted(unknown)}")
        table[(fields[0].strip().lower(), fields[1].strip().lower())] = actions
    return table


_ACL_TABLE: dict[tuple[str, str], frozenset[str]] | None = None


def _acl_table() -> dict[tuple[str, str], frozenset[str]]:
    global _ACL_TABLE
    if _ACL_TABLE is None:
        _ACL_TABLE = load_acl_table()
    return _ACL_TABLE


def normalize_acl(acl: AclRecord, table=None) -> frozenset[tuple[Grantee, str]]:
    """(grantee, normalized action) pairs; unknown permission names raise."""
    table = table if table is not None else _acl_table()
    pairs = set()
    for grant in acl.grants:
        actions = table.get((acl.provider, grant.permission))
        if actions is None:
            raise AclNormalizationError(
                f"unknown {acl.provider} permission {grant.permission!r}"
            )
        pairs.update((grant.grantee, a) for a in actions)
    return frozenset(pairs)


def classify_acl(acl: AclRecord, table=None) -> frozenset[str]:
    """Misconfiguration flags granted to everyone or to any authenticated user."""
    flags = set()
    for grantee, action in normalize_acl(acl, table):
        if grantee in PUBLIC_GRANTEES and action in _ACTION_FLAGS:
            flags.add(_ACTION_FLAGS[action])
    return frozenset(flags)


# -- files -------------------------------------------------------------------


@dataclass(frozen=True)
class FileMeta:
    key: str
    size: int = 0
    etag: str = ""
    last_modified: datetime | None = None

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("file key must be non-empty")

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "size": self.size,
            "etag": self.etag,
            "last_modified": None if self.last_modified is None else self.last_modified.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FileMeta":
        modified = data.get("last_modified")
        return cls(
            data["key"],
            data.get("size", 0),
            data.get("etag", ""),
            None if modified is None else datetime.fromisoformat(modified),
        )


def _basename(key: str) -> str:
    return key.rstrip("/").rsplit("/", 1)[-1]


class PatternError(ValueError):
    pass


@dataclass(frozen=True)
class SensitivePattern:
    id: str
    pattern: str
    category: str
    regex: re.Pattern = field(compare=False, repr=False)
    whole_key: bool = False

    def matches(self, key: str) -> bool:
        target = key if self.whole_key else _basename(key)
        return self.regex.fullmatch(target) is not None


def compile_pattern(pattern_id: str, pattern: str, category: str) -> SensitivePattern:
    if pattern.startswith("^") and pattern.endswith("$"):
        try:
            regex = re.compile(pattern, re.IGNORECASE)
        except re.error as exc:
            raise PatternError(f"{pattern_id}: bad regex {pattern!r}: {exc}") from exc
        return SensitivePattern(pattern_id, pattern, category, regex, whole_key=True)
    if not pattern:
        raise PatternError(f"{pattern_id}: empty pattern")
    regex = re.compile(fnmatch.translate(pattern), re.IGNORECASE)
    return SensitivePattern(pattern_id, pattern, category, regex, whole_key="/" in pattern)


def load_patterns(path: str | Path | None = None) -> tuple[SensitivePattern, ...]:
    """Read ``id<TAB>pattern<TAB>class`` rules; ``#`` lines are comments."""
    path = Path(path) if path is not None else _data("sensitive_patterns.tsv")
    patterns = []
    seen = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not all(f.strip() for f in fields):
            raise PatternError(f"{path}:{lineno}: expected id<TAB>pattern<TAB>class")
        pattern_id = fields[0].strip()
        if pattern_id in seen:
            raise PatternError(f"{path}:{lineno}: duplicate pattern id {pattern_id!r}")
        seen.add(pattern_id)
        try:
            patterns.append(compile_pattern(pattern_id, fields[1].strip(), fields[2].strip()))
        except PatternError as exc:
            raise PatternError(f"{path}:{lineno}: {exc}") from exc
    return tuple(patterns)


_PATTERNS: tuple[SensitivePattern, ...] | None = None


def default_patterns() -> tuple[SensitivePattern, ...]:
    global _PATTERNS
    if _PATTERNS is None:
        _PATTERNS = load_patterns()
    return _PATTERNS


def detect_sensitive(
    files: Iterable[FileMeta], patterns: Sequence[SensitivePattern] | None = None
) -> list[tuple[str, str]]:
    """Every (key, pattern id) match, sorted so file order does not matter."""
    patterns = patterns if patterns is not None else default_patterns()
    hits = []
    for f in files:
        for p in patterns:
            if p.matches(f.key):
                hits.append((f.key, p.id))
    hits.sort()
    return hits


# -- categories ----------------------------------------------------------------

USERS_TXT = "users.txt"
CATEGORY_THRESHOLD = 0.98


@dataclass(frozen=True)
class Category:
    name: str
    keywords: frozenset[str]


def load_categories(path: str | Path | None = None) -> tuple[Category, ...]:
    path = Path(path) if path is not None else _data("categories.tsv")
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, _, keywords = line.partition("\t")
        out.append(Category(name.strip(), frozenset(k.strip().lower() for k in keywords.split(",") if k.strip())))
    return tuple(out)


_CATEGORIES: tuple[Category, ...] | None = None


def default_categories() -> tuple[Category, ...]:
    global _CATEGORIES
    if _CATEGORIES is None:
        _CATEGORIES = load_categories()
    return _CATEGORIES


def key_terms(key: str) -> frozenset[str]:
    """Path segments, the extension and the dot-separated parts of the file name."""
    key = key.lower()
    segments = [s for s in key.split("/") if s]
    if not segments:
        return frozenset()
    filename = segments[-1]
    terms = set(segments)
    terms.update(p for p in filename.split(".") if p)
    return frozenset(terms)


def categorize_bucket(
    files: Sequence[FileMeta], categories: Sequence[Category] | None = None
) -> str | None:
    """Category whose keywords cover at least 98% of the files, if any."""
    if not files:
        raise ValueError("cannot categorize an empty bucket")
    categories = categories if categories is not None else default_categories()
    if len(files) == 1 and _basename(files[0].key).lower() == USERS_TXT:
        if any(c.name == USERS_TXT for c in categories):
            return USERS_TXT
    terms = [key_terms(f.key) for f in files]
    best_name, best_share = None, -1.0
    for cat in categories:
        if cat.name == USERS_TXT:
            continue
        share = sum(1 for t in terms if t & cat.keywords) / len(files)
        # strict comparison keeps the earlier category on ties
        if share >= CATEGORY_THRESHOLD and share > best_share:
            best_name, best_share = cat.name, share
    return best_name


# -- profiles --------------------------------------------------------------------


@dataclass(frozen=True)
class BucketSecurityProfile:
    name: str
    provider: str
    flags: frozenset[str]
    sensitive_matches: tuple[tuple[str, str], ...] = ()
    category: str | None = None
    state: str = "public"
    acl_readable: bool = False

    def __post_init__(self) -> None:
        if (SENSITIVE_CONTENT in self.flags) != bool(self.sensitive_matches):
            raise ValueError("sensitive_content flag must agree with sensitive_matches")

    @property
    def misconfigured(self) -> bool:
        return bool(self.flags & set(ACL_FLAGS))

    @property
    def sensitive(self) -> bool:
        return SENSITIVE_CONTENT in self.flags

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "provider": self.provider,
            "state": self.state,
            "flags": sorted(self.flags),
            "sensitive_matches": [list(m) for m in self.sensitive_matches],
            "category": self.category,
            "acl_readable": self.acl_readable,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BucketSecurityProfile":
        return cls(
            data["name"],
            data["provider"],
            frozenset(data["flags"]),
            tuple(tuple(m) for m in data["sensitive_matches"]),
            data.get("category"),
            data.get("state", "public"),
            data.get("acl_readable", False),
        )


def profile_bucket(
    name: str,
    provider: str,
    acl: AclRecord | None,
    files: Sequence[FileMeta],
    *,
    state: str = "public",
    patterns: Sequence[SensitivePattern] | None = None,
    categories: Sequence[Category] | None = None,
) -> BucketSecurityProfile:
    flags = set(classify_acl(acl)) if acl is not None else set()
    matches = tuple(detect_sensitive(files, patterns)) if files else ()
    if matches:
        flags.add(SENSITIVE_CONTENT)
    category = categorize_bucket(files, categories) if files else None
    return BucketSecurityProfile(
        name, provider, frozenset(flags), matches, category, state, acl_readable=acl is not None
    )


def write_profiles(profiles: Iterable[BucketSecurityProfile], fh: TextIO) -> int:
    n = 0
    for p in profiles:
        fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")
        n += 1
    return n


def read_profiles(fh: TextIO) -> list[BucketSecurityProfile]:
    return [BucketSecurityProfile.from_dict(json.loads(line)) for line in fh if line.strip()]
