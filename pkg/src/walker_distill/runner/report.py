"""Result tables, normalized plot series, static figures and the audit."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import __version__
from ..checkpoint import atomic_write_bytes, atomic_write_json
from ..evaluation.metrics import mean_std, summarize_seed
from ..evaluation.schemas import METRICS
from ..randomization.schemas import SetupId
from .registry import RunRecord, RunRegistry, StageKind, StageStatus

logger = logging.getLogger(__name__)

MISSING = "—"
INVERTED_METRICS = ("tracking_error", "smoothness")
EXPERT_COLUMN = "expert"


@dataclass
class Cell:
    mean: float
    std: float
    values: list[float]

    @classmethod
    def of(cls, values: list[float]) -> "Cell":
        mean, std = mean_std(values)
        return cls(mean, std, list(values))


@dataclass
class ResultsTable:
    """Rows are metric × dataset size, columns the setups; cells aggregate over DP seeds."""

    target: str
    setups: list[str] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    cells: dict[tuple[str, int, str], Cell] = field(default_factory=dict)
    expert: dict[str, Cell] = field(default_factory=dict)

    def cell(self, metric: str, size: int, setup: str) -> Cell | None:
        return self.cells.get((metric, size, setup))

    def to_dict(self) -> dict[str, Any]:
        return {
            "target": self.target,
            "setups": self.setups,
            "sizes": self.sizes,
            "cells": [
                {"metric": m, "size": size, "setup": setup, "mean": c.mean, "std": c.std,
                 "values": c.values}
                for (m, size, setup), c in sorted(self.cells.items())
            ],
            "expert": {
                m: {"mean": c.mean, "std": c.std, "values": c.values}
                for m, c in sorted(self.expert.items())
            },
        }


def format_cell(cell: Cell | None) -> str:
    if cell is None:
        return MISSING
    return f"{round(cell.mean, 2)} ± {round(cell.std, 2)}"


def _setup_order(setups: set[str]) -> list[str]:
    known = [s.value for s in SetupId if s.value in setups]
    return known + sorted(setups - set(known))


def _completed(records: list[RunRecord], stage: StageKind) -> list[RunRecord]:
    return [r for r in records if r.stage == stage and r.status == StageStatus.COMPLETED]


def aggregate(records: list[RunRecord]) -> dict[str, ResultsTable]:
    """Per-target results tables from the latest registry records; empty input gives {}."""
    grouped: dict[tuple[str, str, int, str], list[tuple[int, float]]] = {}
    tables: dict[str, ResultsTable] = {}
    for r in _completed(records, StageKind.EVALUATE):
        target, setup, size = r.params["target"], r.params["setup"], int(r.params["size"])
        table = tables.setdefault(target, ResultsTable(target))
        if setup not in table.setups:
            table.setups.append(setup)
        if size not in table.sizes:
            table.sizes.append(size)
        for m in METRICS:
            grouped.setdefault((target, m, size, setup), []).append(
                (int(r.params["dp_seed"]), float(r.outputs["mean"][m]))
            )
    for (target, m, size, setup), pairs in grouped.items():
        tables[target].cells[(m, size, setup)] = Cell.of([v for _, v in sorted(pairs)])

    for r in _completed(records, StageKind.EXPERT_EVAL):
        target = r.params["target"]
        table = tables.setdefault(target, ResultsTable(target))
        per_seed = sorted(r.outputs["per_seed"], key=lambda s: s["seed"])
        for m in METRICS:
            table.expert[m] = Cell.of([float(s[m]) for s in per_seed])

    for table in tables.values():
        table.setups = _setup_order(set(table.setups))
        table.sizes = sorted(table.sizes)
    return dict(sorted(tables.items()))


def format_table(table: ResultsTable) -> str:
    columns = table.setups + ([EXPERT_COLUMN] if table.expert else [])
    header = ["metric", "size", *columns]
    rows = [header]
    for m in METRICS:
        for size in table.sizes:
            row = [m, str(size)] + [format_cell(table.cell(m, size, s)) for s in table.setups]
            if table.expert:
                row.append(format_cell(table.expert.get(m)))
            rows.append(row)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = [" | ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return f"target: {table.target}\n" + "\n".join(lines) + "\n"


def normalize_metrics(table: ResultsTable) -> dict[str, dict[str, float]]:
    """Min-max scale each metric over all cells; lower-is-better metrics are inverted."""
    series: dict[str, dict[str, float]] = {}
    for m in METRICS:
        raw = {
            f"{setup}/{size}": c.mean
            for (metric, size, setup), c in sorted(table.cells.items()) if metric == m
        }
        if not raw:
            continue
        if m not in INVERTED_METRICS:
            series[m] = raw
            continue
        lo, hi = min(raw.values()), max(raw.values())
        if hi == lo:
            logger.info(f"{m} is constant on {table.target}; every cell maps to 1.0")
            series[m] = {k: 1.0 for k in raw}
        else:
            series[m] = {k: 1.0 - (v - lo) / (hi - lo) for k, v in raw.items()}
    return series


def plot_normalized(
    table: ResultsTable, series: dict[str, dict[str, float]], path: Path
) -> None:
    """Grouped bars: one panel per metric, setups on the x axis, one bar per size."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(METRICS), figsize=(4 * len(METRICS), 3.6),
                             constrained_layout=True)
    x = np.arange(len(table.setups))
    width = 0.8 / max(len(table.sizes), 1)
    for ax, m in zip(axes, METRICS):
        values = series.get(m, {})
        for k, size in enumerate(table.sizes):
            ys = [values.get(f"{setup}/{size}", np.nan) for setup in table.setups]
            ax.bar(x + (k - (len(table.sizes) - 1) / 2) * width, ys, width, label=str(size))
        ax.set_title(m.replace("_", " ") + (" (inverted)" if m in INVERTED_METRICS else ""))
        ax.set_xticks(x, table.setups, rotation=45, ha="right")
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, axis="y", alpha=0.3)
    axes[-1].legend(title="transitions", loc="best", fontsize=8)
    fig.suptitle(f"{table.target} target")
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)


def provenance(repo_root: Path | None = None) -> str:
    """Package version plus the checked-out git commit when one is available."""
    root = repo_root or Path.cwd()
    commit = "0" * 12
    head = root / ".git" / "HEAD"
    try:
        text = head.read_text(encoding="utf-8").strip()
        if text.startswith("ref:"):
            ref_path = root / ".git" / text.split(":", 1)[1].strip()
            text = ref_path.read_text(encoding="utf-8").strip()
        commit = text[:12]
    except OSError:
        pass
    return f"walker-distill {__version__} ({commit})"


def write_report(
    records: list[RunRecord],
    out_dir: str | Path,
    config_hash: str | None = None,
    source: str | None = None,
    plots: bool = True,
) -> list[Path]:
    """Write per-target tables, normalized series and figures; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    source = source or provenance()
    written: list[Path] = []
    for target, table in aggregate(records).items():
        series = normalize_metrics(table)
        header = {"config_hash": config_hash, "provenance": source}

        json_path = out_dir / f"results_{target}.json"
        atomic_write_json(json_path, {**header, **table.to_dict()})
        text_path = out_dir / f"results_{target}.txt"
        text = f"config {config_hash}\nprovenance {source}\n" + format_table(table)
        atomic_write_bytes(text_path, text.encode("utf-8"))
        series_path = out_dir / f"normalized_{target}.json"
        atomic_write_json(series_path, {**header, "target": target, "series": series})
        written += [json_path, text_path, series_path]

        if plots and table.cells:
            png_path = out_dir / f"normalized_{target}.png"
            plot_normalized(table, series, png_path)
            written.append(png_path)
        logger.info(f"Wrote {target} report to {out_dir}")
    return written


@dataclass
class AuditResult:
    checked: int = 0
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


async def audit(registry: RunRegistry, run_id: str | None = None) -> AuditResult:
    """Recompute every evaluation and table cell from the stored per-episode metrics."""
    records = await registry.latest(run_id)
    result = AuditResult()
    rebuilt: list[RunRecord] = []
    for r in records:
        if r.status != StageStatus.COMPLETED or r.stage not in (
            StageKind.EVALUATE, StageKind.EXPERT_EVAL
        ):
            rebuilt.append(r)
            continue
        episodes = await registry.episode_metrics(r.seq)
        by_seed: dict[int, list] = {}
        for e in episodes:
            by_seed.setdefault(e.seed, []).append(e)
        per_seed = [
            summarize_seed(seed, eps).model_dump(mode="json", exclude={"episodes"})
            for seed, eps in sorted(by_seed.items())
        ]
        stored = sorted(r.outputs["per_seed"], key=lambda s: s["seed"])
        result.checked += 1
        if per_seed != stored:
            result.mismatches.append(f"{r.key}: per-seed metrics differ from episode logs")
        mean = {m: mean_std([s[m] for s in per_seed])[0] for m in METRICS} if per_seed else {}
        if mean != r.outputs["mean"]:
            result.mismatches.append(f"{r.key}: seed mean differs from episode logs")
        rebuilt.append(
            RunRecord(r.run_id, r.stage, r.key, r.input_hash, r.status, r.params,
                      {**r.outputs, "per_seed": per_seed, "mean": mean}, seq=r.seq)
        )

    original = {t: tab.to_dict() for t, tab in aggregate(records).items()}
    recomputed = {t: tab.to_dict() for t, tab in aggregate(rebuilt).items()}
    if original != recomputed:
        result.mismatches.append("results tables differ when rebuilt from episode logs")
    logger.info(
        f"Audit: {result.checked} evaluations checked, {len(result.mismatches)} mismatches"
    )
    return result
