from __future__ import annotations

import json
import math
import random
import statistics

import pytest

from bucketscope.dedup import DedupStore
from bucketscope.generators import draw
from bucketscope.namespace_sim import NamespaceSpec, SyntheticBackend, build_namespace
from bucketscope.pipeline import (
    CONTINELLA_OPS,
    CSV_COLUMNS,
    ContinellaModel,
    IterationMetrics,
    PipelineAborted,
    PipelineConfig,
    PipelineError,
    RandomNameModel,
    Run,
    baseline_continella,
    baseline_random,
    extract,
    run,
)
from bucketscope.validation import BackendError, validate_batch


@pytest.fixture(scope="module")
def seeds(tiny_namespace):
    return random.Random(1).sample(tiny_namespace.names(), 300)


def small_config(**kw) -> PipelineConfig:
    base = dict(generator="token_pcfg", batch_size=500, retrain_interval=1000, max_candidates=1500, seed=3)
    return PipelineConfig(**{**base, **kw})


# -- dedup store --------------------------------------------------------------------------


def test_dedup_store_persists_and_truncates(tmp_path):
    path = tmp_path / "d.log"
    with DedupStore(path) as d:
        assert d.add("aaa") and not d.add("aaa")
        assert d.add_many(["bbb", "ccc", "aaa"]) == 2
    with DedupStore(path) as d:
        assert d.names() == ["aaa", "bbb", "ccc"] and "bbb" in d
        d.truncate(1)
        assert "bbb" not in d and len(d) == 1
    assert list(DedupStore.replay(path)) == ["aaa"]


def test_dedup_ignores_torn_last_line(tmp_path):
    path = tmp_path / "d.log"
    path.write_text("aaa\nbbb\nccc")
    assert list(DedupStore.replay(path)) == ["aaa", "bbb"]


# -- extraction ---------------------------------------------------------------------------


def test_extract_union_and_rejects(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    a.write_text("alpha\nbravo\nxy\n\n")
    b.write_text("bravo\ncharlie\nBAD_UPPER\n")
    result = extract([a, b])
    assert result.names == ["alpha", "bravo", "charlie"]
    assert result.rejects == 2 and result.duplicates == 1
    dedup = DedupStore()
    dedup.add("alpha")
    assert extract([a], dedup).names == ["bravo"]
    with pytest.raises(PipelineError):
        extract([tmp_path / "missing.txt"])


# -- config -------------------------------------------------------------------------------


def test_config_validation(tmp_path):
    with pytest.raises(PipelineError):
        PipelineConfig(batch_size=300, retrain_interval=1000)
    with pytest.raises(PipelineError):
        PipelineConfig(generator="lstm")
    with pytest.raises(PipelineError):
        PipelineConfig(batch_size=0)
    path = tmp_path / "c.yaml"
    path.write_text("generator: char_pcfg\nbatch_size: 100\nretrain_interval: 300\n")
    cfg = PipelineConfig.load(path)
    assert cfg.generator == "char_pcfg" and cfg.retrain_interval == 300
    path.write_text("nonsense: 1\n")
    with pytest.raises(PipelineError):
        PipelineConfig.load(path)


def test_zero_candidates_means_no_probes(tiny_namespace, seeds):
    backend = SyntheticBackend(tiny_namespace)
    metrics = run(small_config(max_candidates=0), backend=backend, seed_names=seeds)
    assert metrics.iterations == [] and backend.probes == 0


def test_backend_required():
    with pytest.raises(PipelineError):
        run(small_config())


# -- the loop -------------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["token_pcfg", "char_pcfg", "char_ngram", "token_bigram"])
def test_run_is_deterministic(kind, tiny_namespace, seeds):
    cfg = small_config(generator=kind, max_candidates=1000)
    a = run(cfg, backend=SyntheticBackend(tiny_namespace), seed_names=seeds)
    b = run(cfg, backend=SyntheticBackend(tiny_namespace), seed_names=seeds)
    assert a.counts() == b.counts()
    assert a.found == b.found
    assert a.profiles == b.profiles


def test_metrics_invariants(tiny_namespace, seeds):
    m = run(small_config(), backend=SyntheticBackend(tiny_namespace), seed_names=seeds)
    assert [it.source for it in m.iterations] == ["extraction"] + ["generation"] * 3
    assert m.issued == 1500
    prev = None
    for it in m.iterations:
        assert 0.0 <= it.hit_rate <= 1.0
        if prev is not None:
            assert it.cumulative_issued >= prev.cumulative_issued
            assert it.cumulative_valid >= prev.cumulative_valid
        prev = it
    assert m.iterations[0].valid == len(seeds)
    assert all(name in tiny_namespace for name in m.found)
    assert m.hit_rate == m.valid / m.issued
    assert IterationMetrics.from_dict(m.iterations[1].to_dict()) == m.iterations[1]


def test_profiles_cover_valid_buckets(tiny_namespace, seeds):
    m = run(small_config(max_candidates=500), backend=SyntheticBackend(tiny_namespace), seed_names=seeds)
    profiled = {p.name for p in m.profiles}
    assert set(seeds) <= profiled
    for p in m.profiles:
        assert p.state == tiny_namespace.lookup(p.name)[1]
        if p.state == "private":
            assert p.category is None and not p.sensitive


def test_workdir_logs_have_no_repeats(tiny_namespace, seeds, tmp_path):
    run(small_config(), backend=SyntheticBackend(tiny_namespace), seed_names=seeds, workdir=tmp_path)
    logged = list(DedupStore.replay(tmp_path / "dedup.log"))
    assert len(logged) == len(set(logged)) == len(seeds) + 1500
    pairs = [(r["name"], r["provider"]) for r in map(json.loads, (tmp_path / "validations.jsonl").read_text().splitlines())]
    assert len(pairs) == len(set(pairs)) == 3 * len(logged)
    header = (tmp_path / "metrics.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)


class FlakyBackend(SyntheticBackend):
    """Fails once, on the n-th probe."""

    def __init__(self, namespace, fail_at: int, exc: BaseException):
        super().__init__(namespace)
        self.fail_at = fail_at
        self.exc = exc

    def probe(self, name, provider):
        if self.probes == self.fail_at:
            self.probes += 1
            raise self.exc
        return super().probe(name, provider)


@pytest.mark.parametrize("exc", [BackendError("backend down"), KeyboardInterrupt()])
def test_resume_after_kill_matches_uninterrupted(exc, tiny_namespace, seeds, tmp_path):
    cfg = small_config()
    whole = run(cfg, backend=SyntheticBackend(tiny_namespace), seed_names=seeds, workdir=tmp_path / "whole")

    work = tmp_path / "killed"
    # die in the middle of the second generation batch
    fail_at = 3 * (len(seeds) + 500 + 250)
    expected = PipelineAborted if isinstance(exc, BackendError) else KeyboardInterrupt
    with pytest.raises(expected):
        run(cfg, backend=FlakyBackend(tiny_namespace, fail_at, exc), seed_names=seeds, workdir=work)
    resumed = run(cfg, backend=SyntheticBackend(tiny_namespace), seed_names=seeds, workdir=work, resume=True)

    assert resumed.counts() == whole.counts()
    assert resumed.found == whole.found
    assert resumed.profiles == whole.profiles
    for name in ("dedup.log", "training.txt", "found.txt", "profiles.jsonl"):
        assert (work / name).read_text() == (tmp_path / "whole" / name).read_text(), name
    strip = lambda p: [(r["name"], r["provider"], r["state"]) for r in map(json.loads, p.read_text().splitlines())]
    assert strip(work / "validations.jsonl") == strip(tmp_path / "whole" / "validations.jsonl")


def test_resume_rejects_changed_config(tiny_namespace, seeds, tmp_path):
    run(small_config(max_candidates=500), backend=SyntheticBackend(tiny_namespace), seed_names=seeds, workdir=tmp_path)
    with pytest.raises(PipelineError):
        run(small_config(max_candidates=1000), backend=SyntheticBackend(tiny_namespace),
            seed_names=seeds, workdir=tmp_path, resume=True)


def test_resume_of_finished_run_probes_nothing(tiny_namespace, seeds, tmp_path):
    cfg = small_config(max_candidates=500)
    first = run(cfg, backend=SyntheticBackend(tiny_namespace), seed_names=seeds, workdir=tmp_path)
    backend = SyntheticBackend(tiny_namespace)
    again = run(cfg, backend=backend, seed_names=seeds, workdir=tmp_path, resume=True)
    assert backend.probes == 0 and again.counts() == first.counts()


def test_no_training_names_is_an_error(tiny_namespace):
    with pytest.raises(PipelineError):
        run(small_config(), backend=SyntheticBackend(tiny_namespace), seed_names=["definitely-absent-name"])


# -- baselines ------------------------------------------------------------------------------


def test_random_baseline_matches_analytic_rate():
    k = 20_000
    spec = NamespaceSpec.from_dict({"size": k, "patterns": [["(rand[4])", 1.0]], "public_share": 0.0})
    ns = build_namespace(spec, 2)
    model = RandomNameModel(min_length=4, max_length=4)
    rng = random.Random(0)
    seen: set[str] = set()
    names = []
    n = 40_000
    for _ in range(n):
        name = draw(model, rng, lambda s: s not in seen)
        seen.add(name)
        names.append(name)
    hits = len(validate_batch(SyntheticBackend(ns), names).valid_names())
    p = k / 39 ** 4
    assert abs(hits - n * p) < 5 * math.sqrt(n * p * (1 - p))


def test_random_baseline_on_empty_namespace():
    ns = build_namespace(NamespaceSpec.from_dict({"size": 0, "patterns": [["(rand)", 1.0]]}), 0)
    m = baseline_random(small_config(max_candidates=500), SyntheticBackend(ns))
    assert m.valid == 0 and m.issued == 500


def test_random_model_lengths():
    rng = random.Random(1)
    lengths = [len(RandomNameModel().sample(rng)) for _ in range(20_000)]
    assert min(lengths) == 3 and max(lengths) == 64
    assert statistics.mean(lengths) == pytest.approx(33.5, abs=0.5)


def test_continella_ops_are_equally_likely():
    class Recording(random.Random):
        def __init__(self, seed):
            super().__init__(seed)
            self.ops = []

        def choice(self, seq):
            value = super().choice(seq)
            if seq is CONTINELLA_OPS:
                self.ops.append(value)
            return value

    model = ContinellaModel(["word", "data"])
    rng = Recording(2)
    for _ in range(20_000):
        model.sample(rng)
    for op in CONTINELLA_OPS:
        assert rng.ops.count(op) / len(rng.ops) == pytest.approx(1 / 3, abs=0.01)
    # a sample ends at its first stop unless it hits the step cap first
    assert rng.ops.count("stop") == pytest.approx(20_000, rel=0.01)


def test_continella_finds_short_names(tiny_namespace, seeds):
    m = baseline_continella(small_config(max_candidates=3000), SyntheticBackend(tiny_namespace), seed_names=seeds)
    assert m.issued == 3000
    for name in m.found:
        assert 3 <= len(name)


def test_run_object_exposes_metrics(tiny_namespace, seeds):
    r = Run(small_config(max_candidates=500), SyntheticBackend(tiny_namespace), seed_names=seeds)
    try:
        m = r.execute()
    finally:
        r.close()
    assert m is r.metrics and len(m.generation()) == 1
