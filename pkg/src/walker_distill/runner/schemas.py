"""Request and response models for the matrix job service."""

from typing import Annotated, Any

from pydantic import BaseModel, Field


class MatrixRequest(BaseModel):
    config_path: Annotated[str | None, Field(description="YAML run config on the server")] = None
    config: Annotated[
        dict[str, Any] | None, Field(description="inline run config; merged over config_path")
    ] = None
    overrides: Annotated[list[str], Field(description="dotlist, e.g. dp_seeds=[0]")] = []
    workers: Annotated[int | None, Field(ge=1, description="concurrent stages")] = None


class MatrixJobResponse(BaseModel):
    job_id: str
    run_id: str
    status: str
    stages: int


class MatrixStatusResponse(BaseModel):
    job_id: str
    run_id: str
    status: str  # queued | processing | completed | failed
    stages: int
    completed: int = 0
    failed: int = 0
    blocked: int = 0
    error: str | None = None
    elapsed_seconds: float | None = None
