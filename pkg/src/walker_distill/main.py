"""FastAPI job service for experiment matrix runs."""

import logging
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, HTTPException

from . import __version__
from .config import configure_logging, settings
from .progress import board
from .runner.registry import REGISTRY_NAME, RunRegistry

configure_logging()
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan handler."""
    Path(settings.output_root).mkdir(parents=True, exist_ok=True)
    logger.info(f"Run outputs under {settings.output_root}")
    yield
    logger.info("Shutting down...")


app = FastAPI(
    title="Walker Distill API",
    description="Expert-to-diffusion-policy distillation runs for a planar biped",
    version=__version__,
    lifespan=lifespan,
)

from .routers import matrix_router  # noqa: E402

app.include_router(matrix_router)


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "version": __version__, "active_stages": len(board.to_dict())}


@app.get("/progress")
async def get_progress():
    """Progress of every stage currently running."""
    return board.to_dict()


@app.get("/registry/{run_id}")
async def get_registry(run_id: str):
    """Latest record of every stage of a run."""
    run_dir = Path(settings.output_root) / run_id
    if not (run_dir / REGISTRY_NAME).exists():
        raise HTTPException(404, f"Run not found: {run_id}")
    registry = RunRegistry(run_dir)
    records = await registry.latest(run_id)
    return {"run_id": run_id, "stages": [r.to_dict() for r in records]}


def main():
    """Run the API server."""
    import uvicorn

    uvicorn.run(
        "walker_distill.main:app",
        host=settings.host,
        port=settings.port,
        log_level=settings.log_level.lower(),
    )


if __name__ == "__main__":
    main()
