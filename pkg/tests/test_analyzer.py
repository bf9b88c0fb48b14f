from __future__ import annotations

import io
import math
import random
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bucketscope.analyzer import (
    ALPHABET_SIZE,
    NamingPattern,
    Token,
    decompose,
    estimate_guesses,
    extract_pattern,
    pattern_census,
    read_records,
    shannon_entropy,
    tiling_cost,
    write_records,
)
from bucketscope.corpus import Corpus, CorpusKind, CorpusSet, symbol_corpus
from bucketscope.names import InvalidNameError

from oracles import brute_force_min_cost, random_case


# -- spec examples ---------------------------------------------------------------


def test_dogs_and_dogf(make_corpora):
    d = decompose("dogs", make_corpora(dictionary=["dogs"]))
    assert [(t.text, t.is_random) for t in d.tokens] == [("dogs", False)]
    d = decompose("dogf", make_corpora(dictionary=["dog"]))
    assert [(t.text, t.is_random) for t in d.tokens] == [("dog", False), ("f", True)]


def test_no_corpora_means_one_random_token():
    d = decompose("zq7x", CorpusSet())
    assert [(t.text, t.is_random) for t in d.tokens] == [("zq7x", True)]


def test_test_bucket(make_corpora):
    d = decompose("test-bucket", make_corpora(dictionary=["test", "bucket"]))
    assert [(t.text, t.kind) for t in d.tokens] == [
        ("test", CorpusKind.dictionary),
        ("-", CorpusKind.symbol),
        ("bucket", CorpusKind.dictionary),
    ]
    assert d.guesses == brute_force_min_cost("test-bucket", make_corpora(dictionary=["test", "bucket"]))


def test_estimate_examples():
    corpus = Corpus.from_tokens("dictionary", [f"w{i:03d}" for i in range(99)] + ["target"])
    tok = Token("target", 0, 6, CorpusKind.dictionary, corpus.rank("target"))
    assert tok.rank == 100
    assert estimate_guesses([tok]) == pytest.approx(2.0)
    assert estimate_guesses([]) == 0.0


def test_random_length_18_census_convention():
    name = "a1b2c3d4e5f6g7h8i9"
    d = decompose(name, CorpusSet())
    assert d.census_log10_guesses == pytest.approx(18.0)
    assert d.log10_guesses == pytest.approx(18 * math.log10(ALPHABET_SIZE))
    assert str(extract_pattern(d)) == "(rand)"
    assert str(extract_pattern(d, "length")) == "(rand[18])"


def test_rand_upload_rand(make_corpora):
    d = decompose("k3upload9z", make_corpora(tech_term=["upload"]))
    assert str(extract_pattern(d)) == "(rand,corpus,rand)"
    assert str(extract_pattern(d, "anchored")) == '(rand,"upload",rand)'
    assert str(extract_pattern(d, "kind")) == "(rand,corpus:tech_term,rand)"


def test_corpus_then_random(make_corpora):
    d = decompose("testx7q", make_corpora(dictionary=["test"]))
    assert str(extract_pattern(d)) == "(corpus,rand)"


@pytest.mark.parametrize(
    "name,bits",
    [("aaaa", 0.0), ("ab", 2.0), ("abcd", 8.0), ("aab", 3 * (-(2 / 3) * math.log2(2 / 3) - (1 / 3) * math.log2(1 / 3)))],
)
def test_entropy(name, bits):
    assert shannon_entropy(name) == pytest.approx(bits)


def test_entropy_of_empty_name_rejected():
    with pytest.raises(ValueError):
        shannon_entropy("")


@pytest.mark.parametrize("bad", ["ab", "x" * 65, "Upper", "a b c", "tést"])
def test_illegal_names_rejected(bad):
    with pytest.raises(InvalidNameError):
        decompose(bad, CorpusSet())


def test_census_all_random():
    records = [decompose(n, CorpusSet()) for n in ("qqqq", "zz9zz", "x1y2z3")]
    rows = pattern_census(records)
    assert [(str(r.pattern), r.share) for r in rows] == [("(rand)", 1.0)]


def test_census_hand_set(make_corpora):
    corpora = make_corpora(dictionary=["test", "data"], tech_term=["prod"])
    names = [
        "qzx9k",  # (rand)
        "k77vq",  # (rand)
        "zz9zz",  # (rand)
        "qz9test",  # (rand,corpus)
        "xq7prod",  # (rand,corpus)
        "testqz9",  # (corpus,rand)
        "q9zdatak7v",  # (rand,corpus,rand)
        "test-data",  # (corpus,corpus,corpus)
        "prod-data",  # (corpus,corpus,corpus)
        "data-prod",  # (corpus,corpus,corpus)
    ]
    rows = pattern_census([decompose(n, corpora) for n in names])
    got = {str(r.pattern): (r.count, r.share) for r in rows}
    assert got == {
        "(rand)": (3, 0.3),
        "(corpus,corpus,corpus)": (3, 0.3),
        "(rand,corpus)": (2, 0.2),
        "(corpus,rand)": (1, 0.1),
        "(rand,corpus,rand)": (1, 0.1),
    }
    assert [str(r.pattern) for r in rows][:2] == ["(corpus,corpus,corpus)", "(rand)"]
    rand_row = next(r for r in rows if str(r.pattern) == "(rand)")
    assert rand_row.mean_log10_guesses == pytest.approx(5.0)


def test_census_empty_rejected():
    with pytest.raises(ValueError):
        pattern_census([])


def test_pattern_parse_roundtrip():
    p = NamingPattern.parse("(rand, corpus,rand)")
    assert p.arity == 3 and str(p) == "(rand,corpus,rand)"
    with pytest.raises(ValueError):
        NamingPattern.parse("rand")


def test_records_roundtrip(words):
    ds = [decompose(n, words) for n in ("test-data", "q9zprod", "name1234")]
    buf = io.StringIO()
    assert write_records(ds, buf) == 3
    buf.seek(0)
    back = list(read_records(buf))
    assert back == ds


def test_optimality_against_oracle_sample():
    rng = random.Random(5)
    for _ in range(150):
        name, corpora = random_case(rng)
        if len(name) < 3:
            continue
        assert decompose(name, corpora).guesses == brute_force_min_cost(name, corpora), name


# -- properties ---------------------------------------------------------------------

legal_names = st.text("abcdefgt0123-_.", min_size=3, max_size=20)
entries = st.lists(st.text("abcdeft01", min_size=2, max_size=5), min_size=1, max_size=12)


@lru_cache(maxsize=None)
def _corpora(dictionary: tuple[str, ...], tech: tuple[str, ...]) -> CorpusSet:
    parts = [symbol_corpus(), Corpus.from_tokens("dictionary", dictionary)]
    if tech:
        parts.append(Corpus.from_tokens("tech_term", tech))
    return CorpusSet(parts)


@settings(max_examples=300, deadline=None)
@given(legal_names, entries, st.lists(st.text("abcdeft01", min_size=2, max_size=5), max_size=6))
def test_decomposition_invariants(name, dictionary, tech):
    corpora = _corpora(tuple(dictionary), tuple(tech))
    d = decompose(name, corpora)
    assert "".join(t.text for t in d.tokens) == name
    pos = 0
    for t in d.tokens:
        assert t.start == pos and t.end > t.start and name[t.start:t.end] == t.text
        pos = t.end
    for a, b in zip(d.tokens, d.tokens[1:]):
        assert not (a.is_random and b.is_random)
    assert d.log10_guesses >= 0 and d.shannon_entropy_bits >= 0
    assert extract_pattern(d).arity == len(d.tokens) <= len(name)
    assert decompose(name, corpora) == d
    assert d.guesses == tiling_cost(d.tokens)


@settings(max_examples=300, deadline=None)
@given(legal_names, entries, st.text("abcdeft01-", min_size=2, max_size=5),
       st.sampled_from(["dictionary", "tech_term", "password"]))
def test_adding_an_entry_never_raises_the_estimate(name, dictionary, extra, kind):
    before = _corpora(tuple(dictionary), ())
    kind = CorpusKind(kind)
    grown = before[kind].append(extra) if kind in before else Corpus.from_tokens(kind, [extra])
    after = before.with_corpus(grown)
    assert decompose(name, after).log10_guesses <= decompose(name, before).log10_guesses


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_optimality_property(seed):
    name, corpora = random_case(random.Random(seed))
    if len(name) >= 3:
        assert decompose(name, corpora).guesses == brute_force_min_cost(name, corpora)
