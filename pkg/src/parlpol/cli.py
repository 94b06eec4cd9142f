"""Command line entry point wiring the pipeline stages to a config file.

Exit codes: 0 success, 1 stage failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config
from .gateway import AuthError
from .pipeline import (
    STAGES,
    StageError,
    WorkdirLock,
    run_all,
    stage_export,
    write_run_manifest,
)

EXIT_OK = 0
EXIT_STAGE = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parlpol",
        description=(
            "Measure elite polarization from parliamentary speeches: extract "
            "politician-to-politician references with an LLM backend, resolve "
            "them to parties, and aggregate dyadic sentiment into a time series."
        ),
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_stage(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline config file (TOML or JSON)")
        p.add_argument("--workdir", help="override the working directory")
        p.add_argument("--backend", choices=["mock", "http"], help="override backend kind")
        p.add_argument("--granularity", choices=["quarter", "year"],
                       help="override aggregation granularity")
        p.add_argument("--seed", type=int, help="override the pipeline seed")
        return p

    add_stage("ingest", "normalize the raw corpus into the speech store")
    add_stage("extract", "submit speeches to the LLM backend")
    add_stage("parse", "parse responses into mentions; reprocess failures")
    add_stage("resolve", "canonicalize actors against the registry")
    add_stage("index", "aggregate dyads and compute the polarization series")

    p = add_stage("validate", "sample, align with gold, build supergold, score")
    p.add_argument("--k", type=int, help="override the validation sample size")
    p.add_argument("--validation-seed", type=int,
                   help="override the sampling seed (alias of --seed here)")

    p = add_stage("export", "re-export the computed series")
    p.add_argument("--out", help="directory for the exported files")

    add_stage("all", "run every stage in order")

    p = add_stage("serve", "start the local review service")
    p.add_argument("--host", help="bind host")
    p.add_argument("--port", type=int, help="bind port")

    p = sub.add_parser("synth", help="generate the bundled synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="generator seed")
    p.add_argument("--speeches", type=int, default=None, help="minimum speech count")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if getattr(args, "workdir", None):
        overrides["workdir"] = args.workdir
    if getattr(args, "backend", None):
        overrides["backend.kind"] = args.backend
    if getattr(args, "granularity", None):
        overrides["granularity"] = args.granularity
    if getattr(args, "seed", None) is not None:
        # for validate, the seed on the command line is the sampling seed
        if args.command == "validate":
            overrides["validation.seed"] = args.seed
        else:
            overrides["seed"] = args.seed
    if getattr(args, "k", None) is not None:
        overrides["validation.k"] = args.k
    if getattr(args, "validation_seed", None) is not None:
        overrides["validation.seed"] = args.validation_seed
    if getattr(args, "host", None):
        overrides["service.host"] = args.host
    if getattr(args, "port", None) is not None:
        overrides["service.port"] = args.port
    return overrides


def _run_synth(args: argparse.Namespace) -> int:
    from .synthetic import SyntheticSpec, generate

    spec = SyntheticSpec()
    if args.seed is not None:
        spec.seed = args.seed
    if args.speeches is not None:
        spec.min_speeches = args.speeches
    corpus = generate(args.out, spec)
    print(json.dumps({"outdir": str(corpus.outdir), **corpus.stats}, indent=2))
    print(f"run the pipeline with: parlpol all --config {corpus.config}")
    return EXIT_OK


def _run_serve(cfg) -> int:
    import uvicorn

    from .service import ReviewService, create_app

    service = ReviewService(cfg)
    app = create_app(service)
    try:
        uvicorn.run(app, host=cfg.service.host, port=cfg.service.port, log_level="info")
    except OSError as exc:
        print(f"cannot bind {cfg.service.host}:{cfg.service.port}: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "synth":
        return _run_synth(args)

    try:
        cfg = load_config(args.config, overrides=_overrides(args))
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "serve":
        return _run_serve(cfg)

    try:
        with WorkdirLock(cfg.workdir):
            if args.command == "all":
                results = run_all(cfg)
            elif args.command == "export":
                results = stage_export(cfg, out=args.out)
                write_run_manifest(cfg)
            else:
                results = STAGES[args.command](cfg)
                write_run_manifest(cfg)
        print(json.dumps(results, indent=2, sort_keys=True, default=str))
        return EXIT_OK
    except AuthError as exc:
        print(f"authentication failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (StageError, AssertionError) as exc:
        print(f"stage failed: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except Exception as exc:  # partial artifacts are preserved on disk
        logging.getLogger("parlpol").exception("stage failed")
        print(f"stage failed: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
