"""Command-line entry point: introspect, augment, mine, refine, eval."""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path

from . import augmentation, metrics, preference_miner, refine_agent
from .errors import SqlforgeError, ConfigError
from .executor import DEFAULT_TIMEOUT_SECS
from .model_client import ModelEndpoint
from .schema_catalog import (
    corpus_db_path,
    introspect_database,
    schema_to_json,
)

log = logging.getLogger("sqlforge")

_CONFIG_KEYS = {
    "corpus_root",
    "variant_root",
    "exec_timeout_secs",
    "n_candidates",
    "temperature",
    "max_iters",
    "jobs",
    "seed",
    "generator",
    "debugger",
}


def _default_jobs() -> int:
    return min(os.cpu_count() or 1, 8)


def load_config(path: str | Path) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    values: dict = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r} in section [{section}]")
            values[key] = value
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqlforge",
        description="Execution-grounded text-to-SQL toolkit",
    )
    parser.add_argument("--config", help="INI config file; flags override it")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("introspect", help="dump a database schema as JSON")
    p.add_argument("--corpus", required=True, help="corpus root directory")
    p.add_argument("--db-id", required=True)
    p.add_argument("--sample-values", type=int, default=0,
                   help="number of sample values to fetch per column")
    p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("augment", help="build augmented SFT samples")
    p.add_argument("--mode", required=True, choices=["cross-db", "inner-db"])
    p.add_argument("--samples", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-table", type=float, default=augmentation.DEFAULT_P_TABLE)
    p.add_argument("--p-col", type=float, default=augmentation.DEFAULT_P_COL)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mine", help="mine DPO preference pairs")
    p.add_argument("--samples", required=True)
    p.add_argument("--corpus", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--endpoint", help="model endpoint URL")
    group.add_argument("--mock", help="mock script file (JSON-lines)")
    p.add_argument("--n-candidates", type=int,
                   default=preference_miner.DEFAULT_N_CANDIDATES)
    p.add_argument("--temperature", type=float,
                   default=preference_miner.DEFAULT_TEMPERATURE)
    p.add_argument("--exec-timeout-secs", type=float, default=DEFAULT_TIMEOUT_SECS)
    p.add_argument("--out", required=True)

    p = sub.add_parser("refine", help="run the generate/check/debug loop")
    p.add_argument("--samples", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--generator", required=True,
                   help="http(s)://... or mock:<script>")
    p.add_argument("--debugger", required=True,
                   help="http(s)://... or mock:<script>")
    p.add_argument("--max-iters", type=int, default=refine_agent.DEFAULT_MAX_ITERS)
    p.add_argument("--exec-timeout-secs", type=float, default=DEFAULT_TIMEOUT_SECS)
    p.add_argument("--trace", help="directory for per-sample attempt traces")
    p.add_argument("--out", required=True, help="predictions JSONL output")

    p = sub.add_parser("eval", help="score predictions with EX/TS")
    p.add_argument("--samples", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--variants", help="variant-suite root for TS")
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--exec-timeout-secs", type=float, default=DEFAULT_TIMEOUT_SECS)
    p.add_argument("--json", action="store_true", help="machine-readable summary")
    p.add_argument("--out", help="write the full report JSON here")

    return parser


def _apply_config(args: argparse.Namespace, argv: list[str]) -> None:
    """Fill args from the config file for flags not given on the command line."""
    if not args.config:
        return
    values = load_config(args.config)
    mapping = {
        "corpus_root": ("corpus", str),
        "variant_root": ("variants", str),
        "exec_timeout_secs": ("exec_timeout_secs", float),
        "n_candidates": ("n_candidates", int),
        "temperature": ("temperature", float),
        "max_iters": ("max_iters", int),
        "jobs": ("jobs", int),
        "seed": ("seed", int),
        "generator": ("generator", str),
        "debugger": ("debugger", str),
    }
    given = {tok.split("=")[0].lstrip("-").replace("-", "_") for tok in argv
             if tok.startswith("--")}
    for key, (attr, cast) in mapping.items():
        if key in values and hasattr(args, attr) and attr not in given:
            setattr(args, attr, cast(values[key]))


def _make_client(spec: str):
    return ModelEndpoint.parse(spec).make_client()


def _cmd_introspect(args) -> int:
    path = corpus_db_path(args.corpus, args.db_id)
    schema = introspect_database(path, args.db_id, args.sample_values)
    text = schema_to_json(schema)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_augment(args) -> int:
    records = metrics.load_samples(args.samples)
    samples = metrics.samples_from_records(records, args.corpus)
    schemas = {}
    for s in samples:
        if s.db_id not in schemas:
            schemas[s.db_id] = introspect_database(
                corpus_db_path(args.corpus, s.db_id), s.db_id
            )
    corpus_schemas = list(schemas.values())
    augmented = []
    for s in samples:
        seed = augmentation.derive_seed(args.seed, s.sample_id)
        if args.mode == "cross-db":
            aug = augmentation.cross_db_augment(s, corpus_schemas, seed)
        else:
            aug = augmentation.inner_db_augment(
                s, schemas[s.db_id], seed, p_table=args.p_table, p_col=args.p_col
            )
        augmented.append(aug)
    augmentation.write_augmented(args.out, augmented)
    log.info("wrote %d augmented samples to %s", len(augmented), args.out)
    return 0


def _cmd_mine(args) -> int:
    records = metrics.load_samples(args.samples)
    samples = metrics.samples_from_records(records, args.corpus)
    client = _make_client(args.endpoint if args.endpoint else f"mock:{args.mock}")
    pairs = []
    skipped = 0
    for s in samples:
        db_path = corpus_db_path(args.corpus, s.db_id)
        sample_pairs = preference_miner.mine_pairs(
            s,
            client,
            db_path,
            n=args.n_candidates,
            temperature=args.temperature,
            timeout=args.exec_timeout_secs,
        )
        if not sample_pairs:
            skipped += 1
        pairs.extend(sample_pairs)
    preference_miner.write_pairs(args.out, pairs)
    log.info("wrote %d pairs (%d samples yielded none)", len(pairs), skipped)
    return 0


def _cmd_refine(args) -> int:
    records = metrics.load_samples(args.samples)
    samples = metrics.samples_from_records(records, args.corpus)
    generator = _make_client(args.generator)
    debugger = _make_client(args.debugger)
    schemas = {}
    with open(args.out, "w", encoding="utf-8") as out:
        for s in samples:
            if s.db_id not in schemas:
                schemas[s.db_id] = introspect_database(
                    corpus_db_path(args.corpus, s.db_id), s.db_id
                )
            db_path = corpus_db_path(args.corpus, s.db_id)
            result = refine_agent.refine_sample(
                s,
                schemas[s.db_id],
                generator,
                debugger,
                db_path,
                max_iters=args.max_iters,
                timeout=args.exec_timeout_secs,
            )
            out.write(
                json.dumps(
                    {"sample_id": s.sample_id, "sql": result.final_sql},
                    sort_keys=True,
                )
                + "\n"
            )
            if args.trace:
                refine_agent.write_trace(args.trace, s.sample_id, result)
    return 0


def _cmd_eval(args) -> int:
    records = metrics.load_samples(args.samples)
    samples = metrics.samples_from_records(records, args.corpus)
    predictions = metrics.load_predictions(args.preds)
    report = metrics.evaluate_corpus(
        predictions,
        samples,
        args.corpus,
        variant_root=args.variants,
        parallelism=args.jobs,
        timeout=args.exec_timeout_secs,
    )
    if args.out:
        Path(args.out).write_text(
            json.dumps(metrics.report_to_dict(report), indent=2, sort_keys=True) + "\n"
        )
    if args.json:
        print(
            json.dumps(
                {
                    "ex_accuracy": report.ex_accuracy,
                    "ts_accuracy": report.ts_accuracy,
                    "n_samples": report.n_samples,
                    "error_histogram": dict(sorted(report.error_histogram.items())),
                },
                sort_keys=True,
            )
        )
    else:
        print(metrics.format_summary_table(report))
    return 0


_COMMANDS = {
    "introspect": _cmd_introspect,
    "augment": _cmd_augment,
    "mine": _cmd_mine,
    "refine": _cmd_refine,
    "eval": _cmd_eval,
}


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper())
    try:
        _apply_config(args, argv)
        return _COMMANDS[args.command](args)
    except (SqlforgeError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
