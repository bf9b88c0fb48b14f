"""Extraction, validation and generation loop with retraining, dedup and checkpoints."""

from __future__ import annotations

import csv
import json
import logging
import os
import queue
import random
import threading
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, ClassVar, Iterable, Sequence

import yaml

from .corpus import CorpusKind, CorpusSet, default_corpora
from .dedup import DedupStore
from .generators import MODEL_KINDS, TemplateCache, draw, train
from .names import ALPHABET, ALPHANUMERIC, MAX_LENGTH, MIN_LENGTH, is_legal
from .security import BucketSecurityProfile, profile_bucket
from .validation import (
    ALL_PROVIDERS,
    BatchAborted,
    BucketState,
    ProbeBackend,
    Provider,
    ValidationRecord,
    validate_batch,
)

log = logging.getLogger(__name__)

BASELINE_KINDS = ("random", "continella")
GENERATOR_KINDS = MODEL_KINDS + BASELINE_KINDS


class PipelineError(RuntimeError):
    pass


class PipelineAborted(PipelineError):
    """A backend failure stopped the run; the last checkpoint can be resumed."""

    resumable = True


@dataclass
class PipelineConfig:
    generator: str = "token_pcfg"
    batch_size: int = 10_000
    retrain_interval: int = 10_000
    max_candidates: int = 100_000
    providers: tuple[str, ...] = tuple(p.value for p in ALL_PROVIDERS)
    backend: str = "synthetic"
    seed: int = 0
    parallelism: int = 1
    order: int = 5
    sources: tuple[str, ...] = ()
    security: bool = True

    def __post_init__(self) -> None:
        self.providers = tuple(Provider(p).value for p in self.providers)
        self.sources = tuple(str(s) for s in self.sources)
        self.validate()

    def validate(self) -> None:
        if self.generator not in GENERATOR_KINDS:
            raise PipelineError(f"unknown generator {self.generator!r}; choose from {GENERATOR_KINDS}")
        if self.batch_size < 1:
            raise PipelineError("batch_size must be at least 1")
        if self.retrain_interval < self.batch_size or self.retrain_interval % self.batch_size:
            raise PipelineError("retrain_interval must be a positive multiple of batch_size")
        if self.max_candidates < 0:
            raise PipelineError("max_candidates must be non-negative")
        if self.backend not in ("synthetic", "live"):
            raise PipelineError("backend must be synthetic or live")

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise PipelineError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["providers"] = list(self.providers)
        data["sources"] = list(self.sources)
        return data


@dataclass
class IterationMetrics:
    iteration: int
    source: str  # "extraction" or "generation"
    issued: int
    valid: int
    public: int
    sensitive: int
    misconfigured: int
    duplicates: int
    rejects: int
    generation_seconds: float
    training_seconds: float
    validation_seconds: float
    cumulative_issued: int = 0
    cumulative_valid: int = 0
    cumulative_public: int = 0

    @property
    def hit_rate(self) -> float:
        return self.valid / self.issued if self.issued else 0.0

    def to_dict(self) -> dict:
        data = asdict(self)
        data["hit_rate"] = self.hit_rate
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "IterationMetrics":
        return cls(**{f.name: data[f.name] for f in fields(cls)})

    def counts(self) -> tuple:
        """Everything except wall-clock timings."""
        return (
            self.iteration, self.source, self.issued, self.valid, self.public,
            self.sensitive, self.misconfigured, self.duplicates, self.rejects,
            self.cumulative_issued, self.cumulative_valid, self.cumulative_public,
        )


CSV_COLUMNS = (
    "iteration", "source", "issued", "valid", "public", "sensitive", "misconfigured",
    "duplicates", "rejects", "hit_rate", "generation_seconds", "training_seconds", "validation_seconds",
    "cumulative_issued", "cumulative_valid", "cumulative_public",
)


@dataclass
class RunMetrics:
    iterations: list[IterationMetrics] = field(default_factory=list)
    found: list[str] = field(default_factory=list)  # valid generated names, in discovery order
    profiles: list[BucketSecurityProfile] = field(default_factory=list)

    def generation(self) -> list[IterationMetrics]:
        return [m for m in self.iterations if m.source == "generation"]

    @property
    def issued(self) -> int:
        return sum(m.issued for m in self.generation())

    @property
    def valid(self) -> int:
        return sum(m.valid for m in self.generation())

    @property
    def public(self) -> int:
        return sum(m.public for m in self.generation())

    @property
    def hit_rate(self) -> float:
        """Cumulative generator hit-rate; extraction is not counted."""
        return self.valid / self.issued if self.issued else 0.0

    def counts(self) -> list[tuple]:
        return [m.counts() for m in self.iterations]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for m in self.iterations:
                d = m.to_dict()
                writer.writerow([_fmt(d[c]) for c in CSV_COLUMNS])


def _fmt(value) -> str:
    return f"{value:.6f}" if isinstance(value, float) else str(value)


# -- extraction --------------------------------------------------------------------


@dataclass
class ExtractionResult:
    names: list[str]
    rejects: int = 0
    duplicates: int = 0


def extract(sources: Iterable[str | Path], dedup: DedupStore | None = None) -> ExtractionResult:
    """Union of names from line-per-name files, legality-filtered and deduplicated."""
    result = ExtractionResult([])
    seen: set[str] = set()
    for src in sources:
        try:
            with open(src, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except (OSError, UnicodeDecodeError) as exc:
            raise PipelineError(f"cannot read source {src}: {exc}") from exc
        for line in lines:
            name = line.strip()
            if not name:
                continue
            if not is_legal(name):
                result.rejects += 1
            elif name in seen or (dedup is not None and name in dedup):
                result.duplicates += 1
            else:
                seen.add(name)
                result.names.append(name)
    return result


# -- baselines ----------------------------------------------------------------------


@dataclass
class RandomNameModel:
    """Control arm: length uniform in [min_length, max_length], characters uniform over the alphabet."""

    kind: ClassVar[str] = "random"
    min_length: int = MIN_LENGTH
    max_length: int = MAX_LENGTH
    alphabet: str = ALPHABET

    def sample(self, rng: random.Random) -> str:
        return "".join(rng.choices(self.alphabet, k=rng.randint(self.min_length, self.max_length)))


CONTINELLA_OPS = ("stop", "remove", "concat")


@dataclass
class ContinellaModel:
    """Prior-work generator: a random 3-4 character seed, then remove / concatenate / stop
    with equal probability until stop."""

    words: Sequence[str]
    kind: ClassVar[str] = "continella"
    alphabet: str = ALPHANUMERIC
    max_steps: int = 16

    def sample(self, rng: random.Random) -> str:
        name = "".join(rng.choices(self.alphabet, k=rng.randint(3, 4)))
        for _ in range(self.max_steps):
            op = rng.choice(CONTINELLA_OPS)
            if op == "stop":
                break
            if op == "remove":
                if len(name) > 1:
                    i = rng.randrange(len(name))
                    name = name[:i] + name[i + 1:]
            else:
                name += rng.choice(self.words)
        return name


def baseline_model(kind: str, corpora: CorpusSet):
    if kind == "random":
        return RandomNameModel()
    if kind == "continella":
        return ContinellaModel(corpora[CorpusKind.dictionary].entries)
    raise PipelineError(f"not a baseline: {kind!r}")


# -- the loop ------------------------------------------------------------------------


class _SecurityWorker:
    """Consumer thread turning valid buckets into security profiles."""

    def __init__(self, backend: ProbeBackend, sink=None) -> None:
        self.backend = backend
        self.sink = sink
        self.queue: queue.Queue = queue.Queue()
        self.results: list[BucketSecurityProfile] = []
        self.error: BaseException | None = None
        self._thread = threading.Thread(target=self._loop, name="security", daemon=True)
        self._thread.start()

    def _loop(self) -> None:
        while True:
            item = self.queue.get()
            try:
                if item is None:
                    return
                if self.error is None:
                    self.results.append(self._profile(item))
            except BaseException as exc:  # surfaced by drain()
                self.error = exc
            finally:
                self.queue.task_done()

    def _profile(self, record: ValidationRecord) -> BucketSecurityProfile:
        acl, files = self.backend.inspect(record.name, record.provider)
        if record.state is not BucketState.public:
            files = []
        return profile_bucket(record.name, record.provider.value, acl, files, state=record.state.value)

    def submit(self, record: ValidationRecord) -> None:
        self.queue.put(record)

    def drain(self) -> list[BucketSecurityProfile]:
        """Wait for queued work; return profiles sorted so thread timing never shows."""
        self.queue.join()
        if self.error is not None:
            raise self.error
        out = sorted(self.results, key=lambda p: (p.name, p.provider))
        self.results = []
        return out

    def close(self) -> None:
        self.queue.put(None)
        self._thread.join()


def _truncate_lines(path: Path, count: int) -> None:
    if not path.exists():
        return
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.endswith("\n")][:count]
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("".join(lines), encoding="utf-8")
    os.replace(tmp, path)


def _read_lines(path: Path) -> list[str]:
    if not path.exists():
        return []
    return path.read_text(encoding="utf-8").splitlines()


def _rng_state(rng: random.Random) -> list:
    version, internal, gauss = rng.getstate()
    return [version, list(internal), gauss]


def _set_rng_state(rng: random.Random, state: list) -> None:
    rng.setstate((state[0], tuple(state[1]), state[2]))


class Run:
    """One pipeline project. With a ``workdir`` every iteration ends in a checkpoint."""

    def __init__(
        self,
        config: PipelineConfig,
        backend: ProbeBackend,
        corpora: CorpusSet | None = None,
        workdir: str | Path | None = None,
        *,
        seed_names: Sequence[str] | None = None,
        probe_kwargs: dict | None = None,
        on_iteration: Callable[[IterationMetrics], None] | None = None,
    ) -> None:
        self.config = config
        self.backend = backend
        self.corpora = corpora or default_corpora()
        self.workdir = Path(workdir) if workdir is not None else None
        self.seed_names = list(seed_names or ())
        self.probe_kwargs = {"backoff": 0.0, **(probe_kwargs or {})}
        self.on_iteration = on_iteration
        self.rng = random.Random(config.seed)
        self.metrics = RunMetrics()
        self.training: list[str] = []
        self.trained_on = 0
        self.since_train = 0
        self.records_logged = 0
        self.model = None
        self.cache = TemplateCache(self.corpora)
        if self.workdir is not None:
            self.workdir.mkdir(parents=True, exist_ok=True)
        self.dedup = DedupStore(self._path("dedup.log"))

    def _path(self, name: str) -> Path | None:
        return None if self.workdir is None else self.workdir / name

    # -- checkpointing --

    def _write_checkpoint(self) -> None:
        if self.workdir is None:
            return
        self.dedup.flush()
        state = {
            "config": self.config.to_dict(),
            "rng": _rng_state(self.rng),
            "dedup": len(self.dedup),
            "training": len(self.training),
            "trained_on": self.trained_on,
            "since_train": self.since_train,
            "records": self.records_logged,
            "iterations": [m.to_dict() for m in self.metrics.iterations],
            "found": len(self.metrics.found),
            "profiles": len(self.metrics.profiles),
        }
        tmp = self.workdir / "checkpoint.json.tmp"
        tmp.write_text(json.dumps(state), encoding="utf-8")
        os.replace(tmp, self.workdir / "checkpoint.json")

    def _resume(self) -> bool:
        path = self._path("checkpoint.json")
        if path is None or not path.exists():
            return False
        state = json.loads(path.read_text(encoding="utf-8"))
        if state["config"] != self.config.to_dict():
            raise PipelineError("checkpoint was written by a different configuration")
        _set_rng_state(self.rng, state["rng"])
        self.dedup.truncate(state["dedup"])
        for name, count in (("training.txt", state["training"]), ("found.txt", state["found"]),
                            ("profiles.jsonl", state["profiles"])):
            _truncate_lines(self.workdir / name, count)
        self.training = _read_lines(self.workdir / "training.txt")
        self.metrics.found = _read_lines(self.workdir / "found.txt")
        self.metrics.profiles = [
            BucketSecurityProfile.from_dict(json.loads(line))
            for line in _read_lines(self.workdir / "profiles.jsonl")
        ]
        self.metrics.iterations = [IterationMetrics.from_dict(d) for d in state["iterations"]]
        self.records_logged = state["records"]
        _truncate_lines(self.workdir / "validations.jsonl", self.records_logged)
        _truncate_lines(self.workdir / "metrics.jsonl", len(self.metrics.iterations))
        self.trained_on = state["trained_on"]
        self.since_train = state["since_train"]
        if self.trained_on:
            self.model = self._train(self.training[: self.trained_on])
        return True

    def _append(self, name: str, lines: Iterable[str]) -> None:
        path = self._path(name)
        if path is None:
            return
        with open(path, "a", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")

    # -- stages --

    def _train(self, names: Sequence[str]):
        kind = self.config.generator
        if kind in BASELINE_KINDS:
            return baseline_model(kind, self.corpora)
        return train(kind, names, self.corpora, order=self.config.order, cache=self.cache)

    def _validate(self, names: Sequence[str], worker: _SecurityWorker | None):
        sink = None
        path = self._path("validations.jsonl")
        if path is not None:
            sink = open(path, "a", encoding="utf-8")
        try:
            return validate_batch(
                self.backend,
                names,
                self.config.providers,
                dedup=self.dedup,
                parallelism=self.config.parallelism,
                sink=sink,
                **self.probe_kwargs,
            )
        except BatchAborted as exc:
            raise PipelineAborted(f"backend failure: {exc}") from exc
        finally:
            if sink is not None:
                sink.close()

    def _finish_iteration(
        self, source: str, issued: int, batch, worker, gen_s: float, train_s: float, val_s: float,
        rejects: int = 0,
    ) -> IterationMetrics:
        self.records_logged += len(batch.records)
        valid_names: dict[str, None] = {}
        public_names: dict[str, None] = {}
        for r in batch.records:
            if r.state.valid:
                valid_names.setdefault(r.name, None)
                if worker is not None:
                    worker.submit(r)
            if r.state is BucketState.public:
                public_names.setdefault(r.name, None)
        profiles = worker.drain() if worker is not None else []
        new_valid = list(valid_names)
        self.training.extend(new_valid)
        self._append("training.txt", new_valid)
        if source == "generation":
            self.metrics.found.extend(new_valid)
            self._append("found.txt", new_valid)
        self.metrics.profiles.extend(profiles)
        self._append("profiles.jsonl", (json.dumps(p.to_dict(), sort_keys=True) for p in profiles))
        prev = self.metrics.iterations[-1] if self.metrics.iterations else None
        m = IterationMetrics(
            iteration=len(self.metrics.iterations),
            source=source,
            issued=issued,
            valid=len(valid_names),
            public=len(public_names),
            sensitive=len({p.name for p in profiles if p.sensitive}),
            misconfigured=len({p.name for p in profiles if p.misconfigured}),
            duplicates=batch.duplicates,
            rejects=rejects,
            generation_seconds=gen_s,
            training_seconds=train_s,
            validation_seconds=val_s,
            cumulative_issued=(prev.cumulative_issued if prev else 0) + issued,
            cumulative_valid=(prev.cumulative_valid if prev else 0) + len(valid_names),
            cumulative_public=(prev.cumulative_public if prev else 0) + len(public_names),
        )
        self.metrics.iterations.append(m)
        self._append("metrics.jsonl", [json.dumps(m.to_dict(), sort_keys=True)])
        self._write_checkpoint()
        if self.on_iteration is not None:
            self.on_iteration(m)
        log.info("iteration %d (%s): %d issued, %d valid", m.iteration, source, issued, m.valid)
        return m

    def _generate(self, n: int) -> list[str]:
        batch: set[str] = set()
        out = []
        dedup = self.dedup

        def fresh(name: str) -> bool:
            return name not in batch and name not in dedup

        for _ in range(n):
            name = draw(self.model, self.rng, fresh)
            batch.add(name)
            out.append(name)
        return out

    def execute(self, resume: bool = False) -> RunMetrics:
        cfg = self.config
        if cfg.max_candidates == 0:
            return self.metrics
        resumed = resume and self._resume()
        if not resumed:
            # a failure during extraction rolls back to here
            self._write_checkpoint()
        worker = _SecurityWorker(self.backend) if cfg.security else None
        try:
            if not resumed:
                self._extraction_stage(worker)
            while self.metrics.issued < cfg.max_candidates:
                train_s = 0.0
                if self.model is None or self.since_train >= cfg.retrain_interval:
                    if not self.training and cfg.generator not in BASELINE_KINDS:
                        raise PipelineError("no valid training names after extraction")
                    t0 = time.perf_counter()
                    self.model = self._train(self.training)
                    self.trained_on = len(self.training)
                    self.since_train = 0
                    train_s = time.perf_counter() - t0
                n = min(cfg.batch_size, cfg.max_candidates - self.metrics.issued)
                t0 = time.perf_counter()
                names = self._generate(n)
                gen_s = time.perf_counter() - t0
                t0 = time.perf_counter()
                batch = self._validate(names, worker)
                val_s = time.perf_counter() - t0
                self.since_train += n
                self._finish_iteration("generation", n, batch, worker, gen_s, train_s, val_s)
        finally:
            if worker is not None:
                worker.close()
            self.dedup.flush()
        if self.workdir is not None:
            self.metrics.write_csv(self.workdir / "metrics.csv")
        return self.metrics

    def _extraction_stage(self, worker) -> None:
        names = []
        rejects = 0
        for n in self.seed_names:
            if is_legal(n):
                names.append(n)
            else:
                rejects += 1
        if self.config.sources:
            extracted = extract(self.config.sources, self.dedup)
            names.extend(extracted.names)
            rejects += extracted.rejects
        names = list(dict.fromkeys(names))
        if not names:
            return
        t0 = time.perf_counter()
        batch = self._validate(names, worker)
        self._finish_iteration(
            "extraction", len(names), batch, worker, 0.0, 0.0, time.perf_counter() - t0, rejects
        )

    def close(self) -> None:
        self.dedup.close()


def run(
    config: PipelineConfig,
    corpora: CorpusSet | None = None,
    backend: ProbeBackend | None = None,
    *,
    workdir: str | Path | None = None,
    resume: bool = False,
    seed_names: Sequence[str] | None = None,
    **kwargs,
) -> RunMetrics:
    if backend is None:
        raise PipelineError("a probe backend is required")
    r = Run(config, backend, corpora, workdir, seed_names=seed_names, **kwargs)
    try:
        return r.execute(resume=resume)
    finally:
        r.close()


def baseline_random(config: PipelineConfig, backend: ProbeBackend, **kwargs) -> RunMetrics:
    return run(PipelineConfig(**{**config.to_dict(), "generator": "random"}), backend=backend, **kwargs)


def baseline_continella(config: PipelineConfig, backend: ProbeBackend, **kwargs) -> RunMetrics:
    return run(PipelineConfig(**{**config.to_dict(), "generator": "continella"}), backend=backend, **kwargs)
