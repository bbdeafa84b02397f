"""Append-only SQLite ledger of pipeline stage attempts."""

import asyncio
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import aiosqlite

from ..evaluation.schemas import EpisodeOutcome

logger = logging.getLogger(__name__)

REGISTRY_NAME = "registry.sqlite"


class StageKind(str, Enum):
    EXPERT = "expert"
    COLLECT = "collect"
    TRAIN_DP = "train_dp"
    EVALUATE = "evaluate"
    EXPERT_EVAL = "expert_eval"


class StageStatus(str, Enum):
    COMPLETED = "completed"
    FAILED = "failed"
    BLOCKED = "blocked"


@dataclass
class RunRecord:
    """One stage attempt."""

    run_id: str
    stage: StageKind
    key: str
    input_hash: str
    status: StageStatus
    params: dict[str, Any] = field(default_factory=dict)
    outputs: dict[str, Any] = field(default_factory=dict)
    error: str | None = None
    started_at: float = 0.0
    finished_at: float = 0.0
    seq: int | None = None

    @classmethod
    def from_row(cls, row: aiosqlite.Row) -> "RunRecord":
        return cls(
            run_id=row["run_id"],
            stage=StageKind(row["stage"]),
            key=row["key"],
            input_hash=row["input_hash"],
            status=StageStatus(row["status"]),
            params=json.loads(row["params"]),
            outputs=json.loads(row["outputs"]),
            error=row["error"],
            started_at=row["started_at"],
            finished_at=row["finished_at"],
            seq=row["seq"],
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "run_id": self.run_id,
            "stage": self.stage.value,
            "key": self.key,
            "input_hash": self.input_hash,
            "status": self.status.value,
            "params": self.params,
            "outputs": self.outputs,
            "error": self.error,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }


class RunRegistry:
    """Ledger of stage attempts plus the raw per-episode evaluation metrics.

    Rows are only ever inserted; the state of a stage is its most recent row.
    """

    def __init__(self, path: str | Path):
        path = Path(path)
        self.path = path / REGISTRY_NAME if path.suffix != ".sqlite" else path
        self._lock = asyncio.Lock()

    async def init(self) -> "RunRegistry":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        async with aiosqlite.connect(self.path) as db:
            await db.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    seq INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT NOT NULL,
                    stage TEXT NOT NULL,
                    key TEXT NOT NULL,
                    input_hash TEXT NOT NULL,
                    status TEXT NOT NULL,
                    params TEXT NOT NULL,
                    outputs TEXT NOT NULL,
                    error TEXT,
                    started_at REAL,
                    finished_at REAL
                )
            """)
            await db.execute("""
                CREATE INDEX IF NOT EXISTS idx_runs_key ON runs(run_id, key)
            """)

            # Raw evaluation results, kept for audit
            await db.execute("""
                CREATE TABLE IF NOT EXISTS episode_metrics (
                    run_seq INTEGER NOT NULL REFERENCES runs(seq),
                    key TEXT NOT NULL,
                    seed INTEGER NOT NULL,
                    episode INTEGER NOT NULL,
                    survived INTEGER NOT NULL,
                    steps INTEGER NOT NULL,
                    tracking_error REAL NOT NULL,
                    smoothness REAL NOT NULL
                )
            """)
            await db.execute("""
                CREATE INDEX IF NOT EXISTS idx_episode_metrics_run ON episode_metrics(run_seq)
            """)
            await db.commit()
        return self

    async def append(
        self, record: RunRecord, episodes: list[EpisodeOutcome] | None = None
    ) -> RunRecord:
        async with self._lock:
            async with aiosqlite.connect(self.path) as db:
                cursor = await db.execute(
                    """
                    INSERT INTO runs (run_id, stage, key, input_hash, status, params, outputs,
                                      error, started_at, finished_at)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                    """,
                    (
                        record.run_id,
                        record.stage.value,
                        record.key,
                        record.input_hash,
                        record.status.value,
                        json.dumps(record.params, sort_keys=True),
                        json.dumps(record.outputs, sort_keys=True),
                        record.error,
                        record.started_at,
                        record.finished_at,
                    ),
                )
                record.seq = cursor.lastrowid
                if episodes:
                    await db.executemany(
                        """
                        INSERT INTO episode_metrics (run_seq, key, seed, episode, survived,
                                                     steps, tracking_error, smoothness)
                        VALUES (?, ?, ?, ?, ?, ?, ?, ?)
                        """,
                        [
                            (record.seq, record.key, e.seed, e.episode, int(e.survived),
                             e.steps, e.tracking_error, e.smoothness)
                            for e in episodes
                        ],
                    )
                await db.commit()
        logger.debug(f"Registry: {record.key} -> {record.status.value}")
        return record

    async def entries(self, run_id: str | None = None) -> list[RunRecord]:
        """Every attempt, oldest first."""
        async with aiosqlite.connect(self.path) as db:
            db.row_factory = aiosqlite.Row
            if run_id is None:
                query, args = "SELECT * FROM runs ORDER BY seq", ()
            else:
                query, args = "SELECT * FROM runs WHERE run_id = ? ORDER BY seq", (run_id,)
            async with db.execute(query, args) as cursor:
                rows = await cursor.fetchall()
        return [RunRecord.from_row(r) for r in rows]

    async def latest(self, run_id: str | None = None) -> list[RunRecord]:
        """The most recent attempt per stage key, in first-seen order."""
        current: dict[tuple[str, str], RunRecord] = {}
        for record in await self.entries(run_id):
            current[(record.run_id, record.key)] = record
        return list(current.values())

    async def completed(self, run_id: str, key: str, input_hash: str) -> RunRecord | None:
        for record in reversed(await self.entries(run_id)):
            if record.key == key:
                if record.status == StageStatus.COMPLETED and record.input_hash == input_hash:
                    return record
                return None
        return None

    async def episode_metrics(self, run_seq: int) -> list[EpisodeOutcome]:
        async with aiosqlite.connect(self.path) as db:
            db.row_factory = aiosqlite.Row
            async with db.execute(
                "SELECT * FROM episode_metrics WHERE run_seq = ? ORDER BY seed, episode",
                (run_seq,),
            ) as cursor:
                rows = await cursor.fetchall()
        return [
            EpisodeOutcome(
                seed=r["seed"],
                episode=r["episode"],
                survived=bool(r["survived"]),
                steps=r["steps"],
                tracking_error=r["tracking_error"],
                smoothness=r["smoothness"],
            )
            for r in rows
        ]

    async def run_ids(self) -> list[str]:
        async with aiosqlite.connect(self.path) as db:
            async with db.execute(
                "SELECT run_id FROM runs GROUP BY run_id ORDER BY MIN(seq)"
            ) as cursor:
                rows = await cursor.fetchall()
        return [r[0] for r in rows]
