"""HTTP wrapper around the nearest-subspace search engine."""

from .app import create_app

__all__ = ["create_app"]
