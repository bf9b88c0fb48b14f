from __future__ import annotations

import io
import math
from collections import Counter

import pytest

from bucketscope.analyzer import decompose, extract_pattern
from bucketscope.corpus import default_corpora
from bucketscope.names import is_legal
from bucketscope.namespace_sim import (
    CapacityError,
    NamespaceFormatError,
    NamespaceSpec,
    SpecError,
    SyntheticBackend,
    Template,
    _allocate,
    acl_from_actions,
    build_namespace,
    default_spec,
    dump_sample,
    dump_spec,
    dumps,
    load_namespace,
    load_spec,
    loads,
    oracle_probe,
    save_namespace,
)
from bucketscope.security import PUBLIC_ACL_CHANGE, PUBLIC_DELETE, PUBLIC_WRITE, classify_acl
from bucketscope.validation import ALL_PROVIDERS, BucketState, Provider, probe


def spec_of(patterns, size, **kw) -> NamespaceSpec:
    return NamespaceSpec.from_dict({"size": size, "patterns": patterns, **kw})


def test_ten_random_four_char_names():
    ns = build_namespace(spec_of([["(rand[4])", 1.0]], 10), seed=3)
    names = ns.names()
    assert len(names) == len(set(names)) == 10
    assert all(len(n) == 4 and is_legal(n) for n in names)
    corpora = default_corpora()
    assert all(str(extract_pattern(decompose(n, corpora))) == "(rand)" for n in names)


def test_same_seed_same_bytes():
    spec = default_spec().with_size(400)
    a, b = build_namespace(spec, 5), build_namespace(spec, 5)
    assert a == b and dumps(a) == dumps(b)
    assert build_namespace(spec, 6) != a


def test_save_load_roundtrip(tiny_namespace, tmp_path):
    path = tmp_path / "ns.bin"
    save_namespace(tiny_namespace, path)
    back = load_namespace(path)
    assert back == tiny_namespace
    name = back.names()[17]
    assert back.entry(name) == tiny_namespace.entry(name)


def test_corrupt_namespace_rejected(tiny_namespace):
    blob = dumps(tiny_namespace)
    with pytest.raises(NamespaceFormatError):
        loads(b"NOPE" + blob[4:])
    with pytest.raises(NamespaceFormatError):
        loads(blob[:-5])
    with pytest.raises(NamespaceFormatError):
        loads(blob[:10])


def test_every_name_matches_its_pattern_class(tiny_namespace, tiny_spec):
    corpora = default_corpora()
    allowed = {t.pattern for t in tiny_spec.templates()}
    for name in tiny_namespace.names():
        assert is_legal(name)
        assert str(extract_pattern(decompose(name, corpora))) in allowed


def test_pattern_shares_track_spec(tiny_namespace, tiny_spec):
    corpora = default_corpora()
    got = Counter(str(extract_pattern(decompose(n, corpora))) for n in tiny_namespace.names())
    want = Counter()
    for tpl, share in zip(tiny_spec.templates(), (s for _, s in tiny_spec.pattern_mix)):
        want[tpl.pattern] += share
    for pattern, share in want.items():
        # allocation is exact per template, so only rounding separates the two
        assert got[pattern] / len(tiny_namespace) == pytest.approx(share, abs=len(want) / len(tiny_namespace))


def test_public_share_within_binomial_error(tiny_namespace, tiny_spec):
    backend = SyntheticBackend(tiny_namespace)
    public = 0
    for name in tiny_namespace.names():
        states = [probe(backend, name, p).state for p in ALL_PROVIDERS]
        assert states.count(BucketState.nonexistent) == 2
        public += BucketState.public in states
    n = len(tiny_namespace)
    sd = math.sqrt(tiny_spec.public_share * (1 - tiny_spec.public_share) / n)
    assert abs(public / n - tiny_spec.public_share) < 4 * sd
    assert backend.probes == 3 * n


def test_oracle_probe(tiny_namespace):
    assert oracle_probe(tiny_namespace, "surely-not-a-bucket-name-zz", "aws") == (404, False)
    seen = set()
    for name in tiny_namespace.names():
        provider, state, website = tiny_namespace.lookup(name)
        other = next(p for p in ALL_PROVIDERS if p is not provider)
        assert oracle_probe(tiny_namespace, name, other) == (404, False)
        got = oracle_probe(tiny_namespace, name, provider)
        if state == "public":
            assert got == (200, True)
        elif website:
            assert provider is Provider.alibaba and got == (200, False)
        else:
            assert got == (403, False)
        seen.add((state, website))
    assert {("public", False), ("private", False), ("private", True)} <= seen


def test_website_entries_decode_private():
    spec = spec_of([["(rand[8])", 1.0]], 200, providers={"alibaba": 1.0}, public_share=0.0, website_share=1.0)
    ns = build_namespace(spec, 1)
    backend = SyntheticBackend(ns)
    for name in ns.names()[:20]:
        assert oracle_probe(ns, name, "alibaba") == (200, False)
        assert probe(backend, name, "alibaba").state is BucketState.private


def test_entries_are_lazy_and_stable(tiny_namespace):
    names = tiny_namespace.names()
    for name in names[:200]:
        e = tiny_namespace.entry(name)
        assert e == tiny_namespace.entry(name)
        assert bool(e.files) == (e.state == "public")
    with pytest.raises(KeyError):
        tiny_namespace.entry("not-there-at-all")


def test_capacity_errors():
    with pytest.raises(CapacityError):
        build_namespace(spec_of([['("test")', 1.0]], 2), 0)
    with pytest.raises(CapacityError):
        build_namespace(spec_of([["(rand[1])", 1.0]], 37), 0)


@pytest.mark.parametrize(
    "patch",
    [
        {"patterns": [["(rand)", 0.5], ["(corpus)", 0.4]]},
        {"providers": {"aws": 0.5}},
        {"categories": [["images", 0.7], ["uncategorized", 0.2]]},
        {"patterns": [["(rand,rand)", 1.0]]},
        {"patterns": [["(blob)", 1.0]]},
        {"patterns": [["(corpus:nothing)", 1.0]]},
        {"public_share": 1.5},
        {"providers": {"azure": 1.0}},
        {"bogus_key": 1},
    ],
)
def test_bad_specs_rejected(patch):
    data = {"size": 10, "patterns": [["(rand)", 1.0]], **patch}
    with pytest.raises(SpecError):
        NamespaceSpec.from_dict(data)


def test_template_parse():
    t = Template.parse('(rand[3-5],"img",corpus:domain,rand)')
    assert [s.kind for s in t.slots] == ["rand", "literal", "corpus", "rand"]
    assert t.slots[0].lengths == (3, 5) and t.slots[2].corpus_kind == "domain"
    assert t.slots[3].pooled and not t.slots[0].pooled
    assert t.pattern == "(rand,corpus,corpus,rand)"
    assert Template.parse('("a,b")').slots[0].text == "a,b"


def test_spec_yaml_roundtrip(tmp_path):
    spec = default_spec()
    path = tmp_path / "spec.yaml"
    with open(path, "w") as fh:
        dump_spec(spec, fh)
    assert load_spec(path).canonical_json() == spec.canonical_json()


def test_default_spec_top_five_shares():
    spec = default_spec()
    shares = Counter()
    for tpl, (_, share) in zip(spec.templates(), spec.pattern_mix):
        shares[tpl.pattern] += share
    top = shares.most_common(5)
    assert [p for p, _ in top] == [
        "(rand)", "(rand,corpus)", "(rand,corpus,rand)", "(corpus,rand)", "(corpus,rand,corpus)",
    ]
    assert [round(s, 6) for _, s in top] == [0.285, 0.12, 0.098, 0.065, 0.033]


@pytest.mark.parametrize("size", [0, 1, 7, 1000, 12345])
def test_allocation_is_exact(size):
    shares = [0.285, 0.12, 0.098, 0.065, 0.033, 0.399]
    counts = _allocate(size, shares)
    assert sum(counts) == size
    for c, s in zip(counts, shares):
        assert abs(c - size * s) < 1


@pytest.mark.parametrize("provider", list(Provider))
def test_acl_from_actions_classifies_back(provider):
    assert classify_acl(acl_from_actions(provider, set())) == frozenset()
    acl = acl_from_actions(provider, {"list", "write_objects", "delete_objects"})
    assert {PUBLIC_WRITE, PUBLIC_DELETE} <= classify_acl(acl)
    if provider is not Provider.alibaba:
        acl = acl_from_actions(provider, {"change_permissions"})
        assert classify_acl(acl) == {PUBLIC_ACL_CHANGE}


def test_dump_sample(tiny_namespace):
    buf = io.StringIO()
    assert dump_sample(tiny_namespace, buf, limit=10) == 10
    lines = buf.getvalue().splitlines()
    assert lines[0].split("\t")[0] == "name" and len(lines) == 11
