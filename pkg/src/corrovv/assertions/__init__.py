"""Assertion specifications and their evaluation over simulation traces."""
from .engine import (
    KIND_LABELS,
    KINDS,
    Assertion,
    AssertionResult,
    AssertionSyntaxError,
    ColumnEvaluator,
    EvaluationError,
    Failure,
    SuiteResult,
    TraceTable,
    check_assertion,
    check_suite,
    export_csv,
    find_reference_points,
    format_assertions,
    load_assertions,
    parse_assertions,
    render_json,
    render_text,
    window_steps,
)
from .predicates import PredicateError, format_predicate, parse_predicate

__all__ = [
    "KIND_LABELS", "KINDS", "Assertion", "AssertionResult", "AssertionSyntaxError", "ColumnEvaluator",
    "EvaluationError", "Failure", "PredicateError", "SuiteResult", "TraceTable", "check_assertion",
    "check_suite", "export_csv", "find_reference_points", "format_assertions", "format_predicate",
    "load_assertions", "parse_assertions", "parse_predicate", "render_json", "render_text", "window_steps",
]
