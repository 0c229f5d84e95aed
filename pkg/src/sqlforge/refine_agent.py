"""Generate / invalid-check / debug loop.

A question is first answered by the generator model. The resulting SQL
goes through the invalid check (static schema validation, then a real
execution); failures are routed to the debugger model together with the
failed SQL and its error, and the corrected statement loops back into the
check until it passes or the iteration budget runs out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .executor import DEFAULT_TIMEOUT_SECS, ExecutionOutcome, execute
from .metrics import Sample
from .model_client import GenerationRequest, extract_sql
from .schema_catalog import DatabaseSchema, TableSchema, render_prompt
from .sql_analysis import SYNTAX_ERROR, ValidityReport, validate_against_tables

GENERATOR = "generator"
DEBUGGER = "debugger"

DEFAULT_MAX_ITERS = 3


@dataclass(frozen=True)
class RefineAttempt:
    iteration: int
    sql: str
    validity: ValidityReport
    outcome: ExecutionOutcome | None
    role: str


@dataclass(frozen=True)
class RefineResult:
    final_sql: str
    attempts: tuple[RefineAttempt, ...]
    succeeded: bool
    iterations_used: int


def invalid_check(
    sql: str,
    schema_tables: list[TableSchema] | tuple[TableSchema, ...] | DatabaseSchema,
    db_path: str | Path,
    timeout: float = DEFAULT_TIMEOUT_SECS,
) -> tuple[ValidityReport, ExecutionOutcome | None]:
    """Static validation first; statically valid SQL is then executed and
    downgraded to invalid on an engine error or timeout. An empty result
    set is valid."""
    if isinstance(schema_tables, DatabaseSchema):
        schema_tables = schema_tables.tables
    report = validate_against_tables(sql, schema_tables)
    if not report.is_valid:
        return report, None
    outcome = execute(db_path, sql, timeout)
    if outcome.is_rows:
        return report, outcome
    if outcome.kind == "timeout":
        detail = f"execution exceeded {timeout}s timeout"
    else:
        detail = outcome.error_message or "execution error"
    # Runtime failures reuse the SyntaxError status, carrying the engine
    # message as detail.
    return ValidityReport(SYNTAX_ERROR, detail), outcome


def build_debug_prompt(
    question: str,
    schema_tables,
    failed_sql: str,
    validity: ValidityReport,
) -> str:
    if validity.is_valid:
        raise ValueError("debug prompt requires a failed validity report")
    schema_text = render_prompt(schema_tables, question)
    return (
        f"{schema_text}\n"
        f"-- The following SQL is invalid ({validity.status}: {validity.detail}):\n"
        f"{failed_sql}\n"
        f"-- Output a single corrected SQLite statement answering the question."
    )


def parse_question(
    question: str,
    db: DatabaseSchema,
    generator,
    debugger,
    db_path: str | Path,
    max_iters: int = DEFAULT_MAX_ITERS,
    schema_tables=None,
    timeout: float = DEFAULT_TIMEOUT_SECS,
    temperature: float = 0.0,
) -> RefineResult:
    """Run the full generate/check/debug loop for one question."""
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    tables = tuple(schema_tables) if schema_tables else db.tables

    attempts: list[RefineAttempt] = []
    sql = ""
    for iteration in range(max_iters):
        if iteration == 0:
            prompt = render_prompt(tables, question)
            role = GENERATOR
            client = generator
        else:
            prev = attempts[-1]
            prompt = build_debug_prompt(question, tables, prev.sql, prev.validity)
            role = DEBUGGER
            client = debugger
        response = client.generate(
            GenerationRequest(prompt=prompt, temperature=temperature, n=1)
        )
        sql = extract_sql(response.completions[0])
        validity, outcome = invalid_check(sql, tables, db_path, timeout)
        attempts.append(
            RefineAttempt(
                iteration=iteration,
                sql=sql,
                validity=validity,
                outcome=outcome,
                role=role,
            )
        )
        if validity.is_valid and outcome is not None and outcome.is_rows:
            break

    last = attempts[-1]
    succeeded = last.validity.is_valid and last.outcome is not None and last.outcome.is_rows
    return RefineResult(
        final_sql=last.sql,
        attempts=tuple(attempts),
        succeeded=succeeded,
        iterations_used=last.iteration + 1,
    )


# --- trace serialization ----------------------------------------------------


def result_to_dict(sample_id: str, result: RefineResult) -> dict:
    return {
        "sample_id": sample_id,
        "final_sql": result.final_sql,
        "succeeded": result.succeeded,
        "iterations_used": result.iterations_used,
        "attempts": [
            {
                "iteration": a.iteration,
                "role": a.role,
                "sql": a.sql,
                "validity_status": a.validity.status,
                "validity_detail": a.validity.detail,
                "outcome_kind": a.outcome.kind if a.outcome is not None else None,
            }
            for a in result.attempts
        ],
    }


def write_trace(trace_dir: str | Path, sample_id: str, result: RefineResult) -> None:
    path = Path(trace_dir) / f"{sample_id}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result_to_dict(sample_id, result), indent=2))


def refine_sample(
    sample: Sample,
    db: DatabaseSchema,
    generator,
    debugger,
    db_path: str | Path,
    max_iters: int = DEFAULT_MAX_ITERS,
    timeout: float = DEFAULT_TIMEOUT_SECS,
) -> RefineResult:
    return parse_question(
        sample.question,
        db,
        generator,
        debugger,
        db_path,
        max_iters=max_iters,
        schema_tables=sample.schema_tables,
        timeout=timeout,
    )
