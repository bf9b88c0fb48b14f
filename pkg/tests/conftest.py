from __future__ import annotations

import pytest

from bucketscope.corpus import Corpus, CorpusSet, symbol_corpus
from bucketscope.namespace_sim import NamespaceSpec, build_namespace, default_spec


def small_corpora(**lists: list[str]) -> CorpusSet:
    """CorpusSet from keyword lists, always with the delimiter symbols."""
    corpora = [Corpus.from_tokens(kind, tokens) for kind, tokens in lists.items()]
    return CorpusSet([*corpora, symbol_corpus()])


@pytest.fixture
def words() -> CorpusSet:
    return small_corpora(
        dictionary=["test", "data", "word", "dog", "dogs", "bucket", "name"],
        tech_term=["prod", "dev", "static", "img", "log", "upload"],
        file_extension=["jpg", "png", "sql"],
    )


@pytest.fixture(scope="session")
def tiny_spec() -> NamespaceSpec:
    return default_spec().with_size(3000)


@pytest.fixture(scope="session")
def tiny_namespace(tiny_spec):
    return build_namespace(tiny_spec, seed=11)


@pytest.fixture
def make_corpora():
    return small_corpora
