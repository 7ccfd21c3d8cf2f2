"""
Environment-driven configuration.

Values are read once with os.environ.get, the same way the storage adapter reads
its connection settings, and validated by pydantic.
"""

import os
from functools import lru_cache

from pydantic import BaseModel, Field


class Settings(BaseModel):
    abs_tol: float = Field(default=1e-10, gt=0)
    rel_tol: float = Field(default=1e-9, gt=0)
    rank_tol: float = Field(default=1e-12, gt=0)
    report_dir: str = "reports"
    log_level: str = "INFO"
    api_host: str = "0.0.0.0"
    api_port: int = 8090


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Load settings from SAMPLING_* environment variables."""
    return Settings(
        abs_tol=float(os.environ.get("SAMPLING_ABS_TOL", "1e-10")),
        rel_tol=float(os.environ.get("SAMPLING_REL_TOL", "1e-9")),
        rank_tol=float(os.environ.get("SAMPLING_RANK_TOL", "1e-12")),
        report_dir=os.environ.get("SAMPLING_REPORT_DIR", "reports"),
        log_level=os.environ.get("SAMPLING_LOG_LEVEL", "INFO"),
        api_host=os.environ.get("SAMPLING_API_HOST", "0.0.0.0"),
        api_port=int(os.environ.get("SAMPLING_API_PORT", "8090")),
    )
