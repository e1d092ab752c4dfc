"""
Application Configuration Management
"""

from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings with environment variable support (prefix NILCONE_)."""

    model_config = SettingsConfigDict(
        env_prefix="NILCONE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="INFO")
    log_format: str = Field(default="text")  # text|json
    log_file: Optional[str] = Field(default=None)

    # Reproducibility
    seed: int = Field(default=20240601)
    threads: int = Field(default=1, ge=1)

    # Word metric
    bfs_budget: int = Field(default=200_000_000, ge=1)

    # Non-singularity
    sphere_samples: int = Field(default=100_000, ge=1)
    descent_restarts: int = Field(default=64, ge=0)
    nonsingular_threshold: float = Field(default=1e-6, gt=0)
    singular_threshold: float = Field(default=1e-12, gt=0)

    # Geodesics
    shooting_restarts: int = Field(default=32, ge=1)
    integration_steps: int = Field(default=2048, ge=4)
    endpoint_tolerance: float = Field(default=1e-8, gt=0)
    path_segments: int = Field(default=64, ge=1)
    path_restarts: int = Field(default=4, ge=0)
    abnormal_tolerance: float = Field(default=1e-10, gt=0)
    polygon_resolution: int = Field(default=256, ge=4)  # segments per unit length

    # Convergence
    estimator_gap: float = Field(default=0.5, gt=0)
    unreliable_fraction: float = Field(default=0.1, ge=0)
    full_sphere_limit: int = Field(default=100_000, ge=1)
    sphere_sample_size: int = Field(default=10_000, ge=1)

    # Paths
    output_dir: str = Field(default="output")


# Create global settings instance
settings = Settings()
