"""Command-line entry point: ``bucketscope <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from . import report as reports
from .analyzer import decompose, write_records
from .corpus import default_corpora, load_manifest
from .dedup import DedupStore
from .generators import MODEL_KINDS, dump_text, load_model, save_model, train
from .generators.base import GeneratorStarvation, draw
from .names import is_legal
from .namespace_sim import (
    SyntheticBackend,
    build_namespace,
    default_spec,
    dump_sample,
    load_namespace,
    load_spec,
    save_namespace,
)
from .pipeline import GENERATOR_KINDS, PipelineConfig, PipelineError, run
from .validation import ALL_PROVIDERS, BackendError, BatchAborted, ConfigurationError, LiveBackend, validate_batch


def _read_names(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def _corpora(args):
    return load_manifest(args.corpora) if getattr(args, "corpora", None) else default_corpora()


def _providers(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _backend(args):
    if args.backend == "live":
        return LiveBackend(enabled=args.allow_live, rate=args.rate)
    if not args.namespace:
        raise ConfigurationError("the synthetic backend needs --namespace (build one with `simulate`)")
    return SyntheticBackend(load_namespace(args.namespace))


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("synthetic", "live"), default="synthetic")
    p.add_argument("--namespace", help="synthetic namespace file")
    p.add_argument("--rate", type=float, default=10.0, help="live probes per second")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--providers", default=",".join(p.value for p in ALL_PROVIDERS))
    p.add_argument("--allow-live", action="store_true",
                   help="permit live probing (the acknowledgment variable must also be set)")


def cmd_train(args) -> int:
    model = train(args.kind, _read_names(args.input), _corpora(args), order=args.order)
    save_model(model, args.output)
    if args.dump:
        with open(args.dump, "w", encoding="utf-8") as fh:
            dump_text(model, fh, args.dump_limit)
    return 0


def cmd_generate(args) -> int:
    model = load_model(args.model)
    rng = random.Random(args.seed)
    seen = set(DedupStore.replay(args.exclude)) if args.exclude else set()
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for _ in range(args.count):
            name = draw(model, rng, lambda n: n not in seen)
            seen.add(name)
            out.write(name + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_validate(args) -> int:
    backend = _backend(args)
    names = [n for n in _read_names(args.input) if is_legal(n)]
    dedup = DedupStore(args.dedup) if args.dedup else None
    with open(args.output, "a", encoding="utf-8") as sink:
        result = validate_batch(
            backend, names, _providers(args.providers), dedup=dedup,
            parallelism=args.parallelism, sink=sink,
        )
    if dedup is not None:
        dedup.close()
    print(json.dumps({"probed": len(result.probed), "duplicates": result.duplicates,
                      "valid": len(result.valid_names())}))
    return 0


def cmd_run(args) -> int:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides = {"backend": args.backend, "providers": tuple(_providers(args.providers)),
                 "parallelism": args.parallelism}
    for key in ("generator", "max_candidates", "seed", "batch_size", "retrain_interval"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    config = PipelineConfig(**{**config.to_dict(), **overrides})
    seeds = _read_names(args.seed_names) if args.seed_names else None
    metrics = run(config, _corpora(args), _backend(args), workdir=args.workdir,
                  resume=args.resume, seed_names=seeds)
    print(json.dumps({"issued": metrics.issued, "valid": metrics.valid,
                      "public": metrics.public, "hit_rate": metrics.hit_rate}))
    return 0


def cmd_analyze(args) -> int:
    corpora = _corpora(args)
    names = _read_names(args.input)
    good = [n for n in names if is_legal(n)]
    with open(args.output, "w", encoding="utf-8") as fh:
        write_records((decompose(n, corpora) for n in good), fh)
    if len(good) != len(names):
        print(f"skipped {len(names) - len(good)} illegal names", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    text = reports.build_report(args.kind, args.input, args.top)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    spec = load_spec(args.spec) if args.spec else default_spec()
    if args.size is not None:
        spec = spec.with_size(args.size)
    ns = build_namespace(spec, args.seed, _corpora(args))
    save_namespace(ns, args.output)
    if args.sample:
        with open(args.sample, "w", encoding="utf-8") as fh:
            dump_sample(ns, fh, args.sample_size)
    if args.names:
        Path(args.names).write_text("".join(n + "\n" for n in ns.names()), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bucketscope", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a generator on a name list")
    p.add_argument("--kind", choices=MODEL_KINDS, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--corpora", help="corpus manifest (defaults to the bundled one)")
    p.add_argument("--dump", help="also write a readable table dump here")
    p.add_argument("--dump-limit", type=int, default=50)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample fresh candidates from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("-n", "--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exclude", help="dedup log of names never to emit")
    p.add_argument("--output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="probe names and append validation records")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dedup", help="persistent dedup log")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run the extraction / validation / generation loop")
    p.add_argument("--config", help="YAML pipeline config")
    p.add_argument("--workdir", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--seed-names", help="extracted names to bootstrap from")
    p.add_argument("--generator", choices=GENERATOR_KINDS)
    p.add_argument("--max-candidates", dest="max_candidates", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--retrain-interval", dest="retrain_interval", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--corpora")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="decompose names into token records")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--corpora")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="render a CSV report from records")
    p.add_argument("--kind", choices=reports.REPORT_KINDS, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--top", type=int)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", help="build a synthetic namespace")
    p.add_argument("--spec", help="YAML namespace spec (defaults to the bundled one)")
    p.add_argument("--size", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--sample", help="write a readable sample dump here")
    p.add_argument("--sample-size", type=int, default=100)
    p.add_argument("--names", help="write every name, one per line")
    p.add_argument("--corpora")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, PipelineError, BackendError, BatchAborted, GeneratorStarvation,
            ValueError, OSError) as exc:
        print(f"bucketscope: error: {exc}", file=sys.stderr)
        return 2
