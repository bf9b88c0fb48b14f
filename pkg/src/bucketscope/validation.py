"""Bucket existence and accessibility from HTTP probe responses."""

from __future__ import annotations

import enum
import json
import os
import threading
import time
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Protocol, Sequence, TextIO

from .dedup import DedupStore
from .names import check_name
from .security import AclRecord, FileMeta, Grant, Grantee

LIVE_ACK_ENV = "BUCKETSCOPE_ALLOW_LIVE_PROBES"
LIVE_ACK_VALUE = "yes"
MAX_RETRIES = 3


class Provider(str, enum.Enum):
    aws = "aws"
    gcp = "gcp"
    alibaba = "alibaba"

    @property
    def host_template(self) -> str:
        return _HOSTS[self]

    def host(self, name: str) -> str:
        return self.host_template.format(name=name)

    def url(self, name: str) -> str:
        return f"https://{self.host(name)}/"


# Global endpoints only; region-restricted buckets may answer elsewhere.
_HOSTS = {
    Provider.aws: "{name}.s3.amazonaws.com",
    Provider.gcp: "{name}.storage.googleapis.com",
    Provider.alibaba: "{name}.oss-cn-hangzhou.aliyuncs.com",
}
ALL_PROVIDERS = tuple(Provider)


class BucketState(str, enum.Enum):
    nonexistent = "nonexistent"
    private = "private"
    public = "public"
    indeterminate = "indeterminate"

    @property
    def valid(self) -> bool:
        return self in (BucketState.private, BucketState.public)


def decode_status(provider: Provider | str, status_code: int, listable: bool = False) -> BucketState:
    """404 nonexistent, 403 private, 200 public; Alibaba 200 needs a listing too."""
    provider = Provider(provider)
    if not 100 <= status_code <= 599:
        raise ValueError(f"not an HTTP status code: {status_code}")
    if status_code == 404:
        return BucketState.nonexistent
    if status_code == 403:
        return BucketState.private
    if status_code == 200:
        # an Alibaba website bucket answers 200 without being listable
        if provider is Provider.alibaba and not listable:
            return BucketState.private
        return BucketState.public
    return BucketState.indeterminate


@dataclass(frozen=True)
class ValidationRecord:
    name: str
    provider: Provider
    state: BucketState
    status_code: int
    listable: bool
    probed_at: datetime
    retries: int = 0

    def __post_init__(self) -> None:
        if self.state is BucketState.public and self.status_code != 200:
            raise ValueError("public record must carry status 200")
        if self.state is BucketState.nonexistent and self.status_code != 404:
            raise ValueError("nonexistent record must carry status 404")
        if self.provider is Provider.alibaba and self.state is BucketState.public and not self.listable:
            raise ValueError("public Alibaba record must be listable")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "provider": self.provider.value,
            "state": self.state.value,
            "status_code": self.status_code,
            "listable": self.listable,
            "probed_at": self.probed_at.isoformat(),
            "retries": self.retries,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationRecord":
        return cls(
            data["name"],
            Provider(data["provider"]),
            BucketState(data["state"]),
            data["status_code"],
            data["listable"],
            datetime.fromisoformat(data["probed_at"]),
            data.get("retries", 0),
        )


def write_records(records: Iterable[ValidationRecord], fh: TextIO) -> int:
    n = 0
    for r in records:
        fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
        n += 1
    return n


def read_records(fh: TextIO) -> list[ValidationRecord]:
    return [ValidationRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


# -- backends ------------------------------------------------------------------


class ProbeTimeout(Exception):
    """Transient failure; the probe is retried."""


class BackendError(RuntimeError):
    """Unrecoverable backend failure; aborts the batch."""


class ConfigurationError(RuntimeError):
    pass


class ProbeBackend(Protocol):
    def probe(self, name: str, provider: Provider) -> tuple[int, bool]:
        """HTTP status of a GET on the bucket root and whether it returned a listing."""
        ...

    def inspect(self, name: str, provider: Provider) -> tuple[AclRecord | None, list[FileMeta]]:
        """ACL (when readable) and file metadata of a public bucket."""
        ...


class TokenBucket:
    """Thread-safe token bucket: at most ``rate`` acquisitions per second on average."""

    def __init__(
        self,
        rate: float,
        burst: int = 1,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = max(1, burst)
        self._tokens = float(self.capacity)
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                # the epsilon absorbs float drift that would otherwise ask for a sleep too
                # short to move the clock
                if self._tokens >= 1 - 1e-9:
                    self._tokens = max(0.0, self._tokens - 1)
                    return
                self._sleep((1 - self._tokens) / self.rate)


def _is_listing(body: bytes) -> bool:
    try:
        root = ET.fromstring(body)
    except ET.ParseError:
        return False
    return root.tag.rsplit("}", 1)[-1] == "ListBucketResult"


def _xml_children(elem: ET.Element, tag: str) -> list[ET.Element]:
    return [c for c in elem.iter() if c.tag.rsplit("}", 1)[-1] == tag]


def _xml_text(elem: ET.Element, tag: str) -> str | None:
    for c in elem:
        if c.tag.rsplit("}", 1)[-1] == tag:
            return c.text
    return None


def parse_listing(body: bytes) -> list[FileMeta]:
    root = ET.fromstring(body)
    files = []
    for item in _xml_children(root, "Contents"):
        key = _xml_text(item, "Key")
        if not key:
            continue
        modified = _xml_text(item, "LastModified")
        files.append(
            FileMeta(
                key,
                int(_xml_text(item, "Size") or 0),
                (_xml_text(item, "ETag") or "").strip('"'),
                datetime.fromisoformat(modified.replace("Z", "+00:00")) if modified else None,
            )
        )
    return files


_AWS_GROUPS = {
    "http://acs.amazonaws.com/groups/global/AllUsers": Grantee.all_users,
    "http://acs.amazonaws.com/groups/global/AuthenticatedUsers": Grantee.authenticated_users,
}


def parse_acl(provider: Provider, body: bytes) -> AclRecord:
    root = ET.fromstring(body)
    grants = []
    if provider is Provider.alibaba:
        # <AccessControlList><Grant>public-read</Grant></AccessControlList>
        for g in _xml_children(root, "Grant"):
            if g.text and g.text.strip():
                grants.append(Grant(Grantee.all_users, g.text.strip()))
        return AclRecord(tuple(grants), provider.value)
    for g in _xml_children(root, "Grant"):
        uri = None
        for child in g.iter():
            if child.tag.rsplit("}", 1)[-1] == "URI":
                uri = (child.text or "").strip()
        permission = _xml_text(g, "Permission") or ""
        grants.append(Grant(_AWS_GROUPS.get(uri, Grantee.specific), permission))
    return AclRecord(tuple(grants), provider.value)


class LiveBackend:
    """Real HTTP probing. Refuses to start unless explicitly enabled twice:
    ``enabled=True`` here and ``BUCKETSCOPE_ALLOW_LIVE_PROBES=yes`` in the environment.
    """

    def __init__(
        self,
        *,
        enabled: bool = False,
        rate: float = 10.0,
        timeout: float = 10.0,
        client=None,
        bucket: TokenBucket | None = None,
    ) -> None:
        if not enabled or os.environ.get(LIVE_ACK_ENV) != LIVE_ACK_VALUE:
            raise ConfigurationError(
                f"live probing is disabled; pass enabled=True and set {LIVE_ACK_ENV}={LIVE_ACK_VALUE}"
            )
        import httpx

        self._httpx = httpx
        self.client = client if client is not None else httpx.Client(timeout=timeout)
        self.bucket = bucket if bucket is not None else TokenBucket(rate)
        self.request_times: list[float] = []

    def _get(self, url: str):
        self.bucket.acquire()
        self.request_times.append(time.monotonic())
        try:
            return self.client.get(url)
        except self._httpx.TimeoutException as exc:
            raise ProbeTimeout(str(exc)) from exc
        except self._httpx.TransportError as exc:
            raise ProbeTimeout(str(exc)) from exc

    def probe(self, name: str, provider: Provider) -> tuple[int, bool]:
        resp = self._get(provider.url(name))
        return resp.status_code, resp.status_code == 200 and _is_listing(resp.content)

    def inspect(self, name: str, provider: Provider) -> tuple[AclRecord | None, list[FileMeta]]:
        listing = self._get(provider.url(name))
        files = parse_listing(listing.content) if listing.status_code == 200 and _is_listing(listing.content) else []
        acl = None
        if provider is not Provider.gcp:
            resp = self._get(provider.url(name) + "?acl")
            if resp.status_code == 200:
                try:
                    acl = parse_acl(provider, resp.content)
                except ET.ParseError:
                    acl = None
        return acl, files


# -- probing ---------------------------------------------------------------------


def probe(
    backend: ProbeBackend,
    name: str,
    provider: Provider | str,
    *,
    max_retries: int = MAX_RETRIES,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> ValidationRecord:
    """One GET (plus retries for indeterminate outcomes) composed with ``decode_status``."""
    check_name(name)
    provider = Provider(provider)
    attempt = 0
    while True:
        try:
            status, listable = backend.probe(name, provider)
            state = decode_status(provider, status, listable)
        except ProbeTimeout:
            status, listable, state = 0, False, BucketState.indeterminate
        if state is not BucketState.indeterminate or attempt >= max_retries:
            return ValidationRecord(name, provider, state, status, listable, datetime.now(), attempt)
        attempt += 1
        if backoff > 0:
            sleep(backoff * 2 ** (attempt - 1))


class BatchAborted(RuntimeError):
    """Backend failure mid-batch. ``records`` holds completed names; rerun to resume."""

    def __init__(self, message: str, records: list[ValidationRecord], pending: list[str]) -> None:
        super().__init__(message)
        self.records = records
        self.pending = pending
        self.resumable = True


@dataclass
class BatchResult:
    records: list[ValidationRecord] = field(default_factory=list)
    probed: list[str] = field(default_factory=list)
    duplicates: int = 0

    def valid_names(self) -> list[str]:
        seen = {}
        for r in self.records:
            if r.state.valid:
                seen.setdefault(r.name, None)
        return list(seen)


def validate_batch(
    backend: ProbeBackend,
    names: Sequence[str],
    providers: Sequence[Provider | str] = ALL_PROVIDERS,
    *,
    dedup: DedupStore | None = None,
    parallelism: int = 1,
    sink: TextIO | None = None,
    on_record: Callable[[ValidationRecord], None] | None = None,
    **probe_kwargs,
) -> BatchResult:
    """Probe every fresh (name, provider) pair exactly once.

    Names already in ``dedup`` (or repeated within the batch) are skipped and
    counted as duplicates; probed names are added to ``dedup`` as they finish.
    Records come back in input order regardless of ``parallelism``.
    """
    if not names:
        raise ValueError("empty batch")
    providers = [Provider(p) for p in providers]
    result = BatchResult()
    fresh: list[str] = []
    seen: set[str] = set()
    for name in names:
        if name in seen or (dedup is not None and name in dedup):
            result.duplicates += 1
            continue
        seen.add(name)
        fresh.append(name)

    def probe_all(name: str) -> list[ValidationRecord]:
        return [probe(backend, name, p, **probe_kwargs) for p in providers]

    def finish(name: str, records: list[ValidationRecord]) -> None:
        if dedup is not None:
            dedup.add(name)
        result.probed.append(name)
        result.records.extend(records)
        for r in records:
            if sink is not None:
                sink.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
            if on_record is not None:
                on_record(r)

    if parallelism <= 1:
        for i, name in enumerate(fresh):
            try:
                records = probe_all(name)
            except BackendError as exc:
                raise BatchAborted(str(exc), result.records, fresh[i:]) from exc
            finish(name, records)
        return result

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(probe_all, name) for name in fresh]
        for i, (name, fut) in enumerate(zip(fresh, futures)):
            try:
                records = fut.result()
            except BackendError as exc:
                for later in futures[i:]:
                    later.cancel()
                raise BatchAborted(str(exc), result.records, fresh[i:]) from exc
            finish(name, records)
    return result
