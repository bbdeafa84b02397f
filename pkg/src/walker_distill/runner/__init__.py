"""Experiment matrix: stage planning, run registry, aggregation and reports."""

from .matrix import plan_matrix, run_matrix, run_root
from .registry import RunRecord, RunRegistry, StageKind, StageStatus
from .report import (
    AuditResult,
    ResultsTable,
    aggregate,
    audit,
    format_cell,
    format_table,
    normalize_metrics,
    write_report,
)
from .stages import LocalExecutor, StageExecutor, StageResult, StageTask

__all__ = [
    "AuditResult",
    "LocalExecutor",
    "ResultsTable",
    "RunRecord",
    "RunRegistry",
    "StageExecutor",
    "StageKind",
    "StageResult",
    "StageStatus",
    "StageTask",
    "aggregate",
    "audit",
    "format_cell",
    "format_table",
    "normalize_metrics",
    "plan_matrix",
    "run_matrix",
    "run_root",
    "write_report",
]
