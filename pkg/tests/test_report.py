from __future__ import annotations

import csv
import io
import json

import pytest

from bucketscope.analyzer import decompose, write_records
from bucketscope.corpus import CorpusSet
from bucketscope.namespace_sim import SyntheticBackend
from bucketscope.pipeline import PipelineConfig, run
from bucketscope.report import (
    ReportError,
    build_report,
    guessability_cdf,
    report_guessability,
    report_hitrate,
    report_patterns,
    report_security,
    security_rows,
)
from bucketscope.security import PUBLIC_DELETE, PUBLIC_WRITE, SENSITIVE_CONTENT, BucketSecurityProfile


def rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def test_single_record_pattern_report():
    text = report_patterns([decompose("qzx9k", CorpusSet())])
    assert rows(text) == [{"pattern": "(rand)", "count": "1", "share": "1.000000", "mean_log10_guesses": "5.000000"}]


def test_hand_set_pattern_report(make_corpora):
    corpora = make_corpora(dictionary=["test"])
    names = ["qzx9k", "k9zzq", "testq9z", "q9ztest", "test-test"]
    got = rows(report_patterns([decompose(n, corpora) for n in names]))
    assert [(r["pattern"], r["count"], r["share"]) for r in got] == [
        ("(rand)", "2", "0.400000"),
        ("(corpus,corpus,corpus)", "1", "0.200000"),
        ("(corpus,rand)", "1", "0.200000"),
        ("(rand,corpus)", "1", "0.200000"),
    ]
    assert len(rows(report_patterns([decompose(n, corpora) for n in names], top=2))) == 2


def test_guessability_cdf():
    same = [decompose("qzx9k", CorpusSet())] * 3
    assert guessability_cdf(same) == [(5.0, 1.0)]
    two = [decompose("qzx9k", CorpusSet()), decompose("qzx9kk", CorpusSet())]
    assert guessability_cdf(two) == [(5.0, 0.5), (6.0, 1.0)]
    text = report_guessability(two)
    assert text.splitlines()[0] == "log10_guesses,cumulative_fraction"


def test_empty_inputs_rejected():
    for fn in (report_patterns, report_guessability, report_security, report_hitrate):
        with pytest.raises(ReportError):
            fn([])


def profile(name, provider="aws", flags=(), state="public", category=None, readable=True):
    matches = (("db.sql", "sql_dump"),) if SENSITIVE_CONTENT in flags else ()
    return BucketSecurityProfile(name, provider, frozenset(flags), matches, category, state, readable)


def test_clean_profiles_have_no_flag_rows():
    got = security_rows([profile("a"), profile("b", category="images")])
    assert all(r[0] != "flag" for r in got)


def test_hand_security_set():
    ps = [
        profile("a", flags={PUBLIC_WRITE, PUBLIC_DELETE}, category="images"),
        profile("b", flags={SENSITIVE_CONTENT}, readable=False),
        profile("c", category="images"),
        profile("d", provider="gcp", state="private", readable=True),
    ]
    got = {(r["provider"], r["state"], r["section"], r["item"]): (r["count"], r["population"], r["share"])
           for r in rows(report_security(ps))}
    assert got == {
        ("aws", "public", "acl", "acl_readable"): ("2", "3", "0.666667"),
        ("aws", "public", "flag", "public_write"): ("1", "2", "0.500000"),
        ("aws", "public", "flag", "public_delete"): ("1", "2", "0.500000"),
        ("aws", "public", "flag", "sensitive_content"): ("1", "3", "0.333333"),
        ("aws", "public", "category", "images"): ("2", "3", "0.666667"),
        ("aws", "public", "category", "uncategorized"): ("1", "3", "0.333333"),
        ("gcp", "private", "acl", "acl_readable"): ("1", "1", "1.000000"),
    }


def test_security_write_share_from_mix():
    ps = [profile(f"b{i}", flags={PUBLIC_WRITE, PUBLIC_DELETE} if i < 13 else ()) for i in range(100)]
    got = [r for r in rows(report_security(ps)) if r["item"] == "public_write"]
    assert got[0]["share"] == "0.130000"


def test_category_shares_partition():
    ps = [profile(f"b{i}", category=["images", None, "logs"][i % 3]) for i in range(30)]
    cats = [r for r in rows(report_security(ps)) if r["section"] == "category"]
    # shares are printed to six places, so allow one rounding unit per row
    assert sum(float(r["share"]) for r in cats) == pytest.approx(1.0, abs=len(cats) * 1e-6)


def test_build_report_from_files(tmp_path, tiny_namespace, words):
    records = tmp_path / "d.jsonl"
    with open(records, "w") as fh:
        write_records((decompose(n, words) for n in tiny_namespace.names()[:200]), fh)
    assert build_report("patterns", records, top=3).count("\n") == 4
    assert build_report("guessability", records).startswith("log10_guesses")

    seeds = tiny_namespace.names()[::10]
    cfg = PipelineConfig(batch_size=200, retrain_interval=200, max_candidates=400)
    run(cfg, backend=SyntheticBackend(tiny_namespace), seed_names=seeds, workdir=tmp_path / "w")
    hit = rows(build_report("hitrate", tmp_path / "w" / "metrics.jsonl"))
    assert [r["source"] for r in hit] == ["extraction", "generation", "generation"]
    assert hit[0]["valid"] == str(len(seeds)) and hit[0]["hit_rate"] == "1.000000"
    sec = rows(build_report("security", tmp_path / "w" / "profiles.jsonl"))
    assert {r["provider"] for r in sec} <= {"aws", "gcp", "alibaba"}
    with pytest.raises(ReportError):
        build_report("nope", records)


def test_reports_are_byte_stable(tiny_namespace, words):
    ds = [decompose(n, words) for n in tiny_namespace.names()[:300]]
    assert report_patterns(ds) == report_patterns(list(reversed(ds)))
    assert report_guessability(ds) == report_guessability(list(reversed(ds)))


def test_hitrate_report_columns():
    m = {"iteration": 0, "source": "generation", "issued": 10, "valid": 1, "public": 0,
         "cumulative_issued": 10, "cumulative_valid": 1, "generation_seconds": 0.5, "training_seconds": 0}
    text = report_hitrate([m, json.loads(json.dumps(m))])
    assert rows(text)[0]["hit_rate"] == "0.100000"
