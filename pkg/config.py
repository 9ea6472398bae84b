import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, Field

APP_VERSION = "0.3.0"

UNIT_CONVENTION = {
    "hbar": 1.0,
    "mass": 0.5,
    "l0": 1.0,
    "note": "defaults give hbar^2/2m = 1 so Dirichlet levels read n^2 pi^2 / l^2",
}


class Settings(BaseModel):
    """Runtime settings read from the environment"""
    threads: int = Field(default=1, ge=1, description="QWALLS_THREADS")
    log_level: str = Field(default="WARNING", description="QWALLS_LOG_LEVEL")
    output_dir: Path = Field(default=Path("qwalls_out"), description="QWALLS_OUTPUT_DIR")


def _int_env(name: str, default: int) -> int:
    raw = (os.getenv(name) or "").strip()
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def load_settings() -> Settings:
    load_dotenv(override=False)
    return Settings(
        threads=_int_env("QWALLS_THREADS", 1),
        log_level=(os.getenv("QWALLS_LOG_LEVEL") or "WARNING").strip().upper(),
        output_dir=Path(os.getenv("QWALLS_OUTPUT_DIR") or "qwalls_out"),
    )


def ordered_map(func, items, threads: int | None = None) -> list:
    """Map ``func`` over ``items`` keeping input order; threaded when allowed"""
    items = list(items)
    workers = threads if threads is not None else load_settings().threads
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))
