import errno
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings
from typing import List, Optional
from functools import lru_cache


class Settings(BaseSettings):
    # App Settings
    APP_NAME: str = "treepen"
    APP_VERSION: str = "1.0.0"

    # Growing
    MIN_NODE_FRACTION: float = 0.05

    # Tuning (k* rule)
    TUNE_C: float = 0.10
    K_GRID: str = "0.01:0.01:0.99"

    # Out-of-bag estimation
    BOOTSTRAP_REPLICATES: int = Field(default=100, ge=1)
    SEED: int = Field(default=0, ge=0)

    # Worker processes for tune grids and bootstrap replicates
    N_JOBS: int = Field(default=1, ge=1)

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False

    @property
    def k_grid_values(self) -> List[float]:
        return parse_k_grid(self.K_GRID)

    class Config:
        env_prefix = "TREEPEN_"
        env_file = ".env"
        case_sensitive = True


def parse_k_grid(text: str) -> List[float]:
    """
    Parse a penalty-constant grid.
    Accepts "start:step:end" (inclusive) or a comma separated list.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty k grid")

    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"k grid '{text}' must look like start:step:end")
        start, step, end = (float(part) for part in parts)
        if step <= 0:
            raise ValueError(f"k grid step must be positive, got {step}")
        count = int(round((end - start) / step)) + 1
        values = [round(start + i * step, 10) for i in range(count)]
        values = [v for v in values if v <= end + 1e-12]
    else:
        values = [float(part) for part in text.split(",") if part.strip()]

    return values


def load_settings(config_file: Optional[str] = None) -> Settings:
    """Settings with an explicit dotenv-style config file; env vars still win over it"""
    if config_file is None:
        return get_settings()
    if not Path(config_file).is_file():
        raise FileNotFoundError(errno.ENOENT, "config file not found", config_file)
    return Settings(_env_file=config_file)


@lru_cache()
def get_settings() -> Settings:
    return Settings()
