import os
from dataclasses import dataclass
from typing import Callable, TypeVar

from dotenv import load_dotenv

from exceptions import ConfigurationError

T = TypeVar('T')

# Economic defaults of the worked examples
DEFAULT_GAMMA = 0.0054
DEFAULT_NU = 0.0007
DEFAULT_PERIOD_DAYS = 30.0
DEFAULT_INTEREST_FREE_DAYS = 0.0
DEFAULT_LIMIT_LO = 0.0
DEFAULT_LIMIT_HI = 5000.0

# Calibrated supermarket customer
DEFAULT_ARRIVAL_RATE = 0.6451
DEFAULT_MARK_SHAPE = 2.8946
DEFAULT_MARK_RATE = 0.0769

DEFAULT_SEED = 20110208
DEFAULT_REPLICATIONS = 100000
DEFAULT_LOG_DIR = "logs"
DEFAULT_LOG_LEVEL = "INFO"

DEFAULT_EULER_A = 18.4
DEFAULT_EULER_N = 15
DEFAULT_EULER_M = 11

DEFAULT_CLUSTER_WINDOW_SECS = 3600.0
DEFAULT_EXCLUDED_REASONS = ("pos_error", "incorrect_pin")
DEFAULT_ROUND_TO = 500.0

_dotenv_loaded = False


@dataclass(frozen=True)
class Settings:
    seed: int
    replications: int
    log_dir: str
    log_level: str
    euler_a: float
    euler_n: int
    euler_m: int


def _read(name: str, default: T, cast: Callable[[str], T]) -> T:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError as e:
        raise ConfigurationError(f"Invalid value for {name}: {raw!r} ({e})")


def get_settings() -> Settings:
    """Build settings from the environment, loading .env on first use."""
    global _dotenv_loaded
    if not _dotenv_loaded:
        load_dotenv()
        _dotenv_loaded = True

    return Settings(
        seed=_read("TRANSLIM_SEED", DEFAULT_SEED, int),
        replications=_read("TRANSLIM_REPLICATIONS", DEFAULT_REPLICATIONS, int),
        log_dir=_read("TRANSLIM_LOG_DIR", DEFAULT_LOG_DIR, str),
        log_level=_read("TRANSLIM_LOG_LEVEL", DEFAULT_LOG_LEVEL, str),
        euler_a=_read("TRANSLIM_EULER_A", DEFAULT_EULER_A, float),
        euler_n=_read("TRANSLIM_EULER_N", DEFAULT_EULER_N, int),
        euler_m=_read("TRANSLIM_EULER_M", DEFAULT_EULER_M, int),
    )
