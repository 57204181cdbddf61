"""HTTP service wrapping the simulation engine (FastAPI)."""

from .app import create_app

__all__ = ["create_app"]
