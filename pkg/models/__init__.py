"""Data models and schemas for the hitting-time toolkit."""

from models.schemas import (
    DEFAULT_MASTER_SEED,
    DiffusionConfig,
    ExperimentConfig,
    HittingSample,
    ModelConfig,
    RunConfig,
    StudyConfig,
    SystemConfig,
)

__all__ = [
    "DEFAULT_MASTER_SEED",
    "DiffusionConfig",
    "ExperimentConfig",
    "HittingSample",
    "ModelConfig",
    "RunConfig",
    "StudyConfig",
    "SystemConfig",
]
