"""Utility functions for reports and output files."""

import json
import os
import tempfile
from typing import Any, Dict

import numpy as np


def format_duration(seconds: float) -> str:
    """Format a duration in seconds to a readable string.

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted string like "2m 30s" or "1h 15m 30s"
    """
    minutes, seconds = divmod(int(seconds), 60)
    hours, minutes = divmod(minutes, 60)

    parts = []
    if hours > 0:
        parts.append(f"{hours}h")
    if minutes > 0 or hours > 0:
        parts.append(f"{minutes}m")
    parts.append(f"{seconds}s")

    return " ".join(parts)


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays so json can serialize them."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and np.isnan(value):
        return None
    return value


def atomic_write_text(file_path: str, text: str) -> str:
    """Write text to a temporary file beside file_path, then move it into place.

    Returns:
        The path written
    """
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.splitext(file_path)[1])
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, file_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    return file_path


def save_json(file_path: str, payload: Dict[str, Any]) -> str:
    """Save a JSON report.

    Args:
        file_path: Destination path
        payload: Report content; numpy values are converted

    Returns:
        The path written
    """
    text = json.dumps(to_jsonable(payload), indent=4, ensure_ascii=False, allow_nan=False)
    return atomic_write_text(file_path, text + "\n")
