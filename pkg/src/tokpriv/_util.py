"""Small IO and scheduling helpers."""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TextIO


def open_text(source: str | Path | TextIO | bytes) -> tuple[TextIO, str, bool]:
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8")), "<bytes>", True
    if isinstance(source, (str, Path)):
        return open(source, encoding="utf-8", newline="\n"), str(source), True
    return source, getattr(source, "name", "<stream>"), False


def parallel_map(fn, items, workers: int = 1) -> list:
    """``list(map(fn, items))``, optionally on a thread pool; output order always follows input."""
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]
