"""Dependency-ordered execution of the expert / dataset / diffusion / evaluation grid."""

import asyncio
import logging
import time
from pathlib import Path
from typing import Any

from ..config import settings
from ..schemas import RunConfig
from ..seeding import config_hash, derive_seed
from .registry import RunRecord, RunRegistry, StageKind, StageStatus
from .stages import LocalExecutor, StageExecutor, StageResult, StageTask

logger = logging.getLogger(__name__)

EXPERT_KEY = "expert"

# Config sections whose contents feed each stage's input hash
STAGE_SECTIONS: dict[StageKind, tuple[str, ...]] = {
    StageKind.EXPERT: (
        "robot", "sim", "limits", "gait", "terrain", "omega_range", "expert", "amp"
    ),
    StageKind.COLLECT: ("dataset",),
    StageKind.TRAIN_DP: ("diffusion", "dp_train"),
    StageKind.EVALUATE: ("evaluation",),
    StageKind.EXPERT_EVAL: ("evaluation",),
}


def run_root(config: RunConfig) -> Path:
    return Path(config.output_root or settings.output_root) / config.run_id


def plan_matrix(config: RunConfig, root: Path | None = None) -> list[StageTask]:
    """Every stage of the grid, parents before children."""
    root = root or run_root(config)
    master = config.master_seed
    sizes = config.dataset.resolved_sizes()
    targets = [t.value for t in config.evaluation.targets]

    tasks = [StageTask(StageKind.EXPERT, EXPERT_KEY, derive_seed(master, "expert"),
                       root / "expert")]
    if config.expert.evaluate:
        for target in targets:
            key = f"expert_eval/{target}"
            tasks.append(StageTask(StageKind.EXPERT_EVAL, key, derive_seed(master, key),
                                   root / key, {"target": target}, [EXPERT_KEY]))

    for setup in config.setups:
        for size in sizes:
            cell = f"{setup.value}/{size}"
            collect_key = f"collect/{cell}"
            tasks.append(StageTask(StageKind.COLLECT, collect_key,
                                   derive_seed(master, "collect", setup.value, size),
                                   root / collect_key, {"setup": setup.value, "size": size},
                                   [EXPERT_KEY]))
            for s in config.dp_seeds:
                dp_key = f"train_dp/{cell}/seed{s}"
                tasks.append(StageTask(StageKind.TRAIN_DP, dp_key,
                                       derive_seed(master, "train_dp", setup.value, size, s),
                                       root / dp_key,
                                       {"setup": setup.value, "size": size, "dp_seed": s},
                                       [collect_key]))
                for target in targets:
                    eval_key = f"evaluate/{cell}/seed{s}/{target}"
                    tasks.append(StageTask(StageKind.EVALUATE, eval_key,
                                           derive_seed(master, "evaluate", setup.value, size, s,
                                                       target),
                                           root / eval_key,
                                           {"setup": setup.value, "size": size, "dp_seed": s,
                                            "target": target},
                                           [dp_key]))
    return tasks


def _input_hash(config: RunConfig, task: StageTask, upstream_hashes: list[str]) -> str:
    dump = config.model_dump(mode="json")
    return config_hash(
        {
            "stage": task.stage.value,
            "seed": task.seed,
            "params": task.params,
            "config": {name: dump[name] for name in STAGE_SECTIONS[task.stage]},
            "upstream": upstream_hashes,
        }
    )


def _outputs_present(outputs: dict[str, Any]) -> bool:
    path = outputs.get("path")
    return path is None or Path(path).exists()


async def run_matrix(
    config: RunConfig,
    *,
    registry: RunRegistry | None = None,
    executor: StageExecutor | None = None,
    workers: int | None = None,
    root: Path | None = None,
) -> RunRegistry:
    """Run the grid; stages already completed with the same inputs are skipped.

    A failed stage blocks its dependents; unrelated stages keep going.
    """
    root = root or run_root(config)
    registry = registry or RunRegistry(root)
    await registry.init()
    executor = executor or LocalExecutor(config)
    budget = asyncio.Semaphore(workers or settings.workers)
    run_id = config.run_id

    tasks = plan_matrix(config, root)
    done: dict[str, asyncio.Future] = {
        t.key: asyncio.get_running_loop().create_future() for t in tasks
    }
    counts = {status: 0 for status in StageStatus}
    counts_skipped = 0

    async def run_one(task: StageTask) -> None:
        nonlocal counts_skipped
        parents = [await done[d] for d in task.deps]
        input_hash = _input_hash(config, task, [p.input_hash for p in parents])

        if any(p.status != StageStatus.COMPLETED for p in parents):
            record = await registry.append(
                RunRecord(run_id, task.stage, task.key, input_hash, StageStatus.BLOCKED,
                          task.params, error="upstream stage did not complete")
            )
            counts[StageStatus.BLOCKED] += 1
            done[task.key].set_result(record)
            return

        previous = await registry.completed(run_id, task.key, input_hash)
        if previous is not None and _outputs_present(previous.outputs):
            counts_skipped += 1
            done[task.key].set_result(previous)
            return

        upstream = {p.key: p.outputs for p in parents}
        async with budget:
            started = time.time()
            logger.info(f"Stage {task.key} starting")
            try:
                result: StageResult = await asyncio.to_thread(executor.run, task, upstream)
                record = RunRecord(run_id, task.stage, task.key, input_hash,
                                   StageStatus.COMPLETED, task.params, result.outputs,
                                   started_at=started, finished_at=time.time())
                episodes = result.episodes
            except Exception as exc:
                logger.exception(f"Stage {task.key} failed")
                record = RunRecord(run_id, task.stage, task.key, input_hash,
                                   StageStatus.FAILED, task.params, error=str(exc),
                                   started_at=started, finished_at=time.time())
                episodes = []
        record = await registry.append(record, episodes)
        counts[record.status] += 1
        done[task.key].set_result(record)
        logger.info(
            f"Stage {task.key} {record.status.value} in {record.finished_at - started:.1f}s"
        )

    await asyncio.gather(*(run_one(t) for t in tasks))
    logger.info(
        f"Matrix {run_id}: {counts[StageStatus.COMPLETED]} completed, "
        f"{counts[StageStatus.FAILED]} failed, {counts[StageStatus.BLOCKED]} blocked, "
        f"{counts_skipped} already done"
    )
    return registry
