import logging
import os
from typing import Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

DEFAULT_B = 50
DEFAULT_T0 = 200
DEFAULT_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
DEFAULT_ERR_INF_N_TEST = 100_000

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def get_threads(cli_value: Optional[int] = None) -> Optional[int]:
    """Resolve the worker cap: flag first, then ENSCONV_THREADS, else None (library default)"""
    if cli_value is not None:
        return max(1, int(cli_value))
    env_value = os.getenv("ENSCONV_THREADS")
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            logging.getLogger(__name__).warning("Ignoring non-integer ENSCONV_THREADS=%r", env_value)
    return None


def get_reports_dir() -> str:
    return os.getenv("ENSCONV_REPORTS_DIR", "reports")


def get_build_hash() -> Optional[str]:
    return os.getenv("ENSCONV_BUILD_HASH")


def configure_logging(level: Optional[str] = None) -> None:
    """Install a single stderr handler; repeated calls only change the level"""
    level_name = (level or os.getenv("ENSCONV_LOG_LEVEL", "INFO")).upper()
    root = logging.getLogger()
    if not any(getattr(h, "_ensconv", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._ensconv = True
        root.addHandler(handler)
    root.setLevel(getattr(logging, level_name, logging.INFO))
