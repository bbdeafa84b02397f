"""Experiment matrix job endpoints."""

import logging
import time
import uuid
from collections.abc import Callable

from fastapi import APIRouter, BackgroundTasks, HTTPException

from ..errors import ConfigurationError
from ..runner.matrix import plan_matrix, run_matrix
from ..runner.registry import StageStatus
from ..runner.schemas import MatrixJobResponse, MatrixRequest, MatrixStatusResponse
from ..runner.stages import LocalExecutor, StageExecutor
from ..schemas import RunConfig, load_run_config

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/matrix", tags=["matrix"])

# In-memory job tracking
_jobs: dict[str, MatrixStatusResponse] = {}
_job_start_times: dict[str, float] = {}

executor_factory: Callable[[RunConfig], StageExecutor] = LocalExecutor


def _resolve_config(request: MatrixRequest) -> RunConfig:
    return load_run_config(request.config_path, request.overrides, request.config)


@router.post("", response_model=MatrixJobResponse)
async def start_matrix(
    request: MatrixRequest,
    background_tasks: BackgroundTasks,
) -> MatrixJobResponse:
    """Start a matrix run. Returns a job ID for status polling."""
    try:
        config = _resolve_config(request)
    except (ConfigurationError, ValueError, OSError) as e:
        raise HTTPException(422, f"Invalid run config: {e}") from e

    job_id = str(uuid.uuid4())[:8]
    stages = len(plan_matrix(config))
    _jobs[job_id] = MatrixStatusResponse(
        job_id=job_id, run_id=config.run_id, status="queued", stages=stages
    )
    background_tasks.add_task(_run_matrix_job, job_id, config, request.workers)
    return MatrixJobResponse(job_id=job_id, run_id=config.run_id, status="queued", stages=stages)


async def _run_matrix_job(job_id: str, config: RunConfig, workers: int | None) -> None:
    """Background task for a matrix run."""
    start_time = time.time()
    _job_start_times[job_id] = start_time
    _jobs[job_id].status = "processing"

    try:
        registry = await run_matrix(config, executor=executor_factory(config), workers=workers)
        latest = await registry.latest(config.run_id)
        job = _jobs[job_id]
        job.completed = sum(r.status == StageStatus.COMPLETED for r in latest)
        job.failed = sum(r.status == StageStatus.FAILED for r in latest)
        job.blocked = sum(r.status == StageStatus.BLOCKED for r in latest)
        job.status = "completed"
        job.elapsed_seconds = time.time() - start_time
        logger.info(f"Matrix job {job_id} completed in {job.elapsed_seconds:.1f}s")
    except Exception as e:
        logger.exception(f"Matrix job {job_id} failed: {e}")
        _jobs[job_id].status = "failed"
        _jobs[job_id].error = str(e)
        _jobs[job_id].elapsed_seconds = time.time() - start_time


@router.get("/status/{job_id}", response_model=MatrixStatusResponse)
async def get_job_status(job_id: str) -> MatrixStatusResponse:
    """Get matrix job status."""
    if job_id not in _jobs:
        raise HTTPException(404, f"Job not found: {job_id}")

    job = _jobs[job_id]
    if job.status == "processing" and job_id in _job_start_times:
        job.elapsed_seconds = time.time() - _job_start_times[job_id]

    return job
