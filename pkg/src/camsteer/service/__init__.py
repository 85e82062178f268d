"""Session-scoped HTTP service tying ingestion, training, explanation,
annotation, and fine-tuning together behind /api/v1/."""

from .app import create_app

__all__ = ["create_app"]
