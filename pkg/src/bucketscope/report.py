"""CSV summaries of decompositions, security profiles and run metrics.

Every report is a pure function of its input records and returns CSV text
with a header row; floats are written with six decimals so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from .analyzer import TokenDecomposition, pattern_census
from .analyzer import read_records as read_decompositions
from .security import ACL_FLAGS, SENSITIVE_CONTENT, BucketSecurityProfile, read_profiles

REPORT_KINDS = ("patterns", "guessability", "security", "hitrate")

PATTERN_COLUMNS = ("pattern", "count", "share", "mean_log10_guesses")
GUESSABILITY_COLUMNS = ("log10_guesses", "cumulative_fraction")
SECURITY_COLUMNS = ("section", "provider", "state", "item", "count", "population", "share")
HITRATE_COLUMNS = (
    "iteration", "source", "issued", "valid", "public", "hit_rate",
    "cumulative_issued", "cumulative_valid", "cumulative_hit_rate",
    "generation_seconds", "training_seconds",
)
UNCATEGORIZED = "uncategorized"
ACL_READABLE = "acl_readable"


class ReportError(ValueError):
    pass


def _csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def report_patterns(
    records: Iterable[TokenDecomposition], top: int | None = None, detail: str = "class"
) -> str:
    """Pattern census, most common first; ``top`` keeps the first k rows."""
    records = list(records)
    if not records:
        raise ReportError("no decomposition records")
    rows = pattern_census(records, detail)
    if top is not None:
        rows = rows[:top]
    return _csv(PATTERN_COLUMNS, ((str(r.pattern), r.count, r.share, r.mean_log10_guesses) for r in rows))


def guessability_cdf(records: Iterable[TokenDecomposition]) -> list[tuple[float, float]]:
    values = sorted(round(d.census_log10_guesses, 6) for d in records)
    if not values:
        raise ReportError("no decomposition records")
    counts = Counter(values)
    points, seen = [], 0
    for value in sorted(counts):
        seen += counts[value]
        points.append((value, seen / len(values)))
    return points


def report_guessability(records: Iterable[TokenDecomposition]) -> str:
    """Empirical CDF of log10 guesses: one row per distinct value."""
    return _csv(GUESSABILITY_COLUMNS, guessability_cdf(records))


def security_rows(profiles: Iterable[BucketSecurityProfile]) -> list[tuple]:
    profiles = list(profiles)
    if not profiles:
        raise ReportError("no security profiles")
    groups: dict[tuple[str, str], list[BucketSecurityProfile]] = defaultdict(list)
    for p in profiles:
        groups[(p.provider, p.state)].append(p)
    rows = []
    for (provider, state), group in sorted(groups.items()):
        readable = [p for p in group if p.acl_readable]
        if readable:
            rows.append(("acl", provider, state, ACL_READABLE, len(readable), len(group), len(readable) / len(group)))
        # permission shares are out of the buckets whose ACL could be read
        for flag in ACL_FLAGS:
            n = sum(1 for p in readable if flag in p.flags)
            if n:
                rows.append(("flag", provider, state, flag, n, len(readable), n / len(readable)))
        n = sum(1 for p in group if SENSITIVE_CONTENT in p.flags)
        if n:
            rows.append(("flag", provider, state, SENSITIVE_CONTENT, n, len(group), n / len(group)))
        if state == "public":
            cats = Counter(p.category or UNCATEGORIZED for p in group)
            for cat in sorted(cats):
                rows.append(("category", provider, state, cat, cats[cat], len(group), cats[cat] / len(group)))
    return rows


def report_security(profiles: Iterable[BucketSecurityProfile]) -> str:
    """Per provider and state: ACL readability, flag counts and public-bucket categories."""
    return _csv(SECURITY_COLUMNS, security_rows(profiles))


def report_hitrate(metrics: Iterable[dict]) -> str:
    """Hit-rate and timing per iteration from metrics records."""
    metrics = list(metrics)
    if not metrics:
        raise ReportError("no metrics records")
    rows = []
    for m in metrics:
        cum = m["cumulative_valid"] / m["cumulative_issued"] if m["cumulative_issued"] else 0.0
        rate = m["valid"] / m["issued"] if m["issued"] else 0.0
        rows.append((
            m["iteration"], m["source"], m["issued"], m["valid"], m["public"], rate,
            m["cumulative_issued"], m["cumulative_valid"], cum,
            float(m["generation_seconds"]), float(m["training_seconds"]),
        ))
    return _csv(HITRATE_COLUMNS, rows)


def build_report(kind: str, input_path: str | Path, top: int | None = None) -> str:
    """Read the records ``kind`` needs from a JSONL file and render the report."""
    if kind not in REPORT_KINDS:
        raise ReportError(f"unknown report kind {kind!r}; choose from {REPORT_KINDS}")
    with open(input_path, encoding="utf-8") as fh:
        if kind == "patterns":
            return report_patterns(read_decompositions(fh), top)
        if kind == "guessability":
            return report_guessability(read_decompositions(fh))
        if kind == "security":
            return report_security(read_profiles(fh))
        return report_hitrate(json.loads(line) for line in fh if line.strip())
