"""Runtime settings: capacity guards, run defaults and the data directory."""

import math
import os
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path


DEFAULT_LAMBDA = 2 / math.pi


def _default_data_dir() -> Path:
    # Store in user's home, next to other dot-folders
    return Path.home() / ".uqising"


@dataclass(frozen=True)
class Settings:
    """Process-wide defaults. Every consumer also accepts explicit overrides."""

    capacity_guard: int = 26
    unitary_guard: int = 12
    k_max: int = 100
    readout_shots: int = 1024
    lam: float = DEFAULT_LAMBDA
    data_dir: Path = field(default_factory=_default_data_dir)

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from UQISING_* environment variables."""
        settings = cls()
        env = os.environ
        if "UQISING_CAPACITY_GUARD" in env:
            settings = replace(settings, capacity_guard=int(env["UQISING_CAPACITY_GUARD"]))
        if "UQISING_UNITARY_GUARD" in env:
            settings = replace(settings, unitary_guard=int(env["UQISING_UNITARY_GUARD"]))
        if "UQISING_LAMBDA" in env:
            settings = replace(settings, lam=float(env["UQISING_LAMBDA"]))
        if "UQISING_HOME" in env:
            settings = replace(settings, data_dir=Path(env["UQISING_HOME"]))
        return settings

    def ensure_data_dir(self) -> Path:
        """Create the data directory if needed and return it."""
        self.data_dir.mkdir(parents=True, exist_ok=True)
        return self.data_dir


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings.from_env()
