"""EX / TS scoring for single samples and whole corpora."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import executor, sql_analysis
from .errors import CorpusLayoutError, EmptyVariantSuiteError, GoldExecutionFailed
from .executor import DEFAULT_TIMEOUT_SECS, execute, results_match
from .schema_catalog import (
    DatabaseSchema,
    TableSchema,
    corpus_db_path,
    introspect_database,
)

MISSING_PREDICTION_DETAIL = "missing prediction"


@dataclass(frozen=True)
class Sample:
    sample_id: str
    db_id: str
    question: str
    gold_sql: str
    schema_tables: tuple[TableSchema, ...] = ()


@dataclass(frozen=True)
class EvalVerdict:
    sample_id: str
    ex_match: bool
    ts_match: bool | None
    pred_sql: str
    failure_class: str | None
    outcome_kind: str


@dataclass(frozen=True)
class EvalReport:
    ex_accuracy: float
    ts_accuracy: float | None
    n_samples: int
    error_histogram: dict[str, int]
    verdicts: tuple[EvalVerdict, ...]


def _order_sensitive(gold_sql: str) -> bool:
    try:
        return sql_analysis.extract_references(gold_sql).has_order_by
    except sql_analysis.ParseError:
        return False


def execution_accuracy(
    pred_sql: str,
    sample: Sample,
    db_path: str | Path,
    timeout: float = DEFAULT_TIMEOUT_SECS,
) -> bool:
    gold_outcome = execute(db_path, sample.gold_sql, timeout)
    pred_outcome = execute(db_path, pred_sql, timeout)
    return results_match(pred_outcome, gold_outcome, _order_sensitive(sample.gold_sql))


def test_suite_accuracy(
    pred_sql: str,
    sample: Sample,
    variant_db_paths: list[str | Path],
    timeout: float = DEFAULT_TIMEOUT_SECS,
) -> bool:
    """EX must hold on every variant database; short-circuits on failure."""
    if not variant_db_paths:
        raise EmptyVariantSuiteError(sample.sample_id)
    for path in variant_db_paths:
        try:
            if not execution_accuracy(pred_sql, sample, path, timeout):
                return False
        except GoldExecutionFailed as exc:
            raise GoldExecutionFailed(f"variant {path}: {exc}") from exc
    return True


def variant_suite_paths(variant_root: str | Path, db_id: str) -> list[Path]:
    suite_dir = Path(variant_root) / db_id
    if not suite_dir.is_dir():
        return []
    return sorted(suite_dir.glob("*.sqlite"))


@dataclass
class _EvalContext:
    corpus_root: Path
    variant_root: Path | None
    timeout: float
    schemas: dict[str, DatabaseSchema] = field(default_factory=dict)

    def schema(self, db_id: str) -> DatabaseSchema:
        if db_id not in self.schemas:
            path = corpus_db_path(self.corpus_root, db_id)
            if not path.exists():
                raise CorpusLayoutError(f"expected database file at {path}")
            self.schemas[db_id] = introspect_database(path, db_id)
        return self.schemas[db_id]


def _evaluate_one(ctx: _EvalContext, sample: Sample, pred_sql: str | None) -> EvalVerdict:
    db_path = corpus_db_path(ctx.corpus_root, sample.db_id)
    if not db_path.exists():
        raise CorpusLayoutError(f"expected database file at {db_path}")
    if pred_sql is None:
        return EvalVerdict(
            sample_id=sample.sample_id,
            ex_match=False,
            ts_match=False if _has_suite(ctx, sample.db_id) else None,
            pred_sql="",
            failure_class=sql_analysis.SYNTAX_ERROR,
            outcome_kind=executor.EXEC_ERROR,
        )
    gold_outcome = execute(db_path, sample.gold_sql, ctx.timeout)
    pred_outcome = execute(db_path, pred_sql, ctx.timeout)
    order = _order_sensitive(sample.gold_sql)
    ex = results_match(pred_outcome, gold_outcome, order)

    ts: bool | None = None
    if ctx.variant_root is not None:
        suite = variant_suite_paths(ctx.variant_root, sample.db_id)
        if suite:
            ts = test_suite_accuracy(pred_sql, sample, suite, ctx.timeout)

    failure = None
    if not ex:
        failure = sql_analysis.validate(pred_sql, ctx.schema(sample.db_id)).status
    return EvalVerdict(
        sample_id=sample.sample_id,
        ex_match=ex,
        ts_match=ts,
        pred_sql=pred_sql,
        failure_class=failure,
        outcome_kind=pred_outcome.kind,
    )


def _has_suite(ctx: _EvalContext, db_id: str) -> bool:
    return ctx.variant_root is not None and bool(
        variant_suite_paths(ctx.variant_root, db_id)
    )


def evaluate_corpus(
    predictions: dict[str, str],
    samples: list[Sample],
    corpus_root: str | Path,
    variant_root: str | Path | None = None,
    parallelism: int = 1,
    timeout: float = DEFAULT_TIMEOUT_SECS,
) -> EvalReport:
    """Score every sample; missing predictions count as failures. The
    report is deterministic regardless of ``parallelism``."""
    unknown = set(predictions) - {s.sample_id for s in samples}
    if unknown:
        raise CorpusLayoutError(f"predictions for unknown sample ids: {sorted(unknown)}")
    ctx = _EvalContext(
        corpus_root=Path(corpus_root),
        variant_root=Path(variant_root) if variant_root is not None else None,
        timeout=timeout,
    )
    # Warm the schema cache serially; worker threads then only read it.
    for s in samples:
        ctx.schema(s.db_id)

    if parallelism <= 1:
        verdicts = [_evaluate_one(ctx, s, predictions.get(s.sample_id)) for s in samples]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            verdicts = list(
                pool.map(
                    lambda s: _evaluate_one(ctx, s, predictions.get(s.sample_id)),
                    samples,
                )
            )
    verdicts.sort(key=lambda v: v.sample_id)

    n = len(samples)
    ex_count = sum(1 for v in verdicts if v.ex_match)
    ts_values = [v.ts_match for v in verdicts if v.ts_match is not None]
    histogram: dict[str, int] = {}
    for v in verdicts:
        if not v.ex_match:
            key = v.failure_class or sql_analysis.VALID
            histogram[key] = histogram.get(key, 0) + 1
    return EvalReport(
        ex_accuracy=ex_count / n if n else 0.0,
        ts_accuracy=(sum(ts_values) / len(ts_values)) if ts_values else None,
        n_samples=n,
        error_histogram=histogram,
        verdicts=tuple(verdicts),
    )


# --- serialization ----------------------------------------------------------


def load_samples(path: str | Path) -> list[dict]:
    """Raw sample records from a JSON-lines file."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def samples_from_records(
    records: list[dict], corpus_root: str | Path
) -> list[Sample]:
    """Attach each record's full database schema as its prompt schema."""
    schemas: dict[str, DatabaseSchema] = {}
    samples = []
    for rec in records:
        db_id = rec["db_id"]
        if db_id not in schemas:
            path = corpus_db_path(corpus_root, db_id)
            if not path.exists():
                raise CorpusLayoutError(f"expected database file at {path}")
            schemas[db_id] = introspect_database(path, db_id)
        samples.append(
            Sample(
                sample_id=str(rec["sample_id"]),
                db_id=db_id,
                question=rec["question"],
                gold_sql=rec["gold_sql"],
                schema_tables=schemas[db_id].tables,
            )
        )
    return samples


def load_predictions(path: str | Path) -> dict[str, str]:
    preds: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                preds[str(rec["sample_id"])] = rec["sql"]
    return preds


def report_to_dict(report: EvalReport) -> dict:
    return {
        "ex_accuracy": report.ex_accuracy,
        "ts_accuracy": report.ts_accuracy,
        "n_samples": report.n_samples,
        "error_histogram": dict(sorted(report.error_histogram.items())),
        "verdicts": [
            {
                "sample_id": v.sample_id,
                "ex_match": v.ex_match,
                "ts_match": v.ts_match,
                "pred_sql": v.pred_sql,
                "failure_class": v.failure_class,
                "outcome_kind": v.outcome_kind,
            }
            for v in report.verdicts
        ],
    }


def format_summary_table(report: EvalReport, model_label: str = "predictions") -> str:
    """Plain-text summary mirroring an EX/TS leaderboard row."""
    ex = 100.0 * report.ex_accuracy
    ts = "-" if report.ts_accuracy is None else f"{100.0 * report.ts_accuracy:.1f}"
    lines = [
        f"{'Model':<30} {'EX':>6} {'TS':>6}",
        f"{model_label:<30} {ex:>6.1f} {ts:>6}",
        "",
        f"samples: {report.n_samples}",
    ]
    if report.error_histogram:
        lines.append("failure classes:")
        for key, count in sorted(report.error_histogram.items()):
            lines.append(f"  {key:<20} {count}")
    return "\n".join(lines)
