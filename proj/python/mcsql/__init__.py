"""Multi-candidate text-to-SQL pipeline.

The heavy lifting lives in the native ``_mcsql`` extension; this module turns
its JSON payloads into plain Python objects.
"""

from __future__ import annotations

import json
import os
from typing import Any, Iterable, Mapping

from . import _mcsql
from ._mcsql import ConfigError, Error

__version__ = _mcsql.__version__

__all__ = ["ConfigError", "Error", "cache_stats", "execute", "resolved_config", "run", "__version__"]


def resolved_config(config_file: str | os.PathLike, overrides: Mapping[str, Any] | None = None) -> dict:
    """Config file plus overrides, validated, as the manifest would record it."""
    return json.loads(_mcsql.resolved_config(os.fspath(config_file), json.dumps(dict(overrides)) if overrides else ""))


def run(
    config_file: str | os.PathLike,
    run_dir: str | os.PathLike,
    overrides: Mapping[str, Any] | None = None,
    examples: Iterable[str] = (),
) -> dict:
    """Full pipeline run (or resume). Returns exit code, fixture misses and the report."""
    payload = _mcsql.run(
        os.fspath(config_file),
        os.fspath(run_dir),
        json.dumps(dict(overrides)) if overrides else "",
        list(examples),
    )
    return json.loads(payload)


def execute(db: str | os.PathLike, sql: str, deterministic_timing: bool = True, timeout_ms: int = 5000) -> dict:
    """Runs one read-only query and returns status, fingerprint, row count and time."""
    return json.loads(_mcsql.execute(os.fspath(db), sql, deterministic_timing, timeout_ms))


def cache_stats(directory: str | os.PathLike) -> dict:
    return json.loads(_mcsql.cache_stats(os.fspath(directory)))
