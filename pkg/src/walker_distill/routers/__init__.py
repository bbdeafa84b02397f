"""API routers module."""

from .matrix import router as matrix_router

__all__ = ["matrix_router"]
