"""Module for writing machine-readable reports.

CSV reports start with a schema comment line "# rfrsabr-<kind> v<version>"
followed by a header row; floats carry 17 significant digits.
"""

import io
import logging
from typing import Dict, List, Optional

import pandas as pd

from utils.general_utils import atomic_write_text, save_json

from .errors import ConfigError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"

SCHEMAS: Dict[str, List[str]] = {
    "price": ["style", "strike", "pv", "implied_vol", "time_to_exercise", "alpha_hat", "rho_hat", "nu_hat"],
    "smile": ["strike", "style", "pv", "implied_vol", "alpha_hat", "rho_hat", "nu_hat"],
    "smile-curves": ["strike", "style", "curve", "pv", "implied_vol", "alpha_hat", "rho_hat", "nu_hat"],
    "simulate": [
        "strike",
        "style",
        "mc_pv",
        "mc_std_error",
        "mc_implied_vol",
        "mc_vol_std_error",
        "analytic_vol",
        "gap",
        "within_tolerance",
    ],
    "paths": ["path", "t", "rate", "vol"],
    "hw-compare": ["t", "psi", "psi_tilde", "gap"],
    "calibration": ["strike", "style", "quote_kind", "quote_vol", "model_vol", "residual", "weight"],
}


def schema_line(kind: str) -> str:
    return f"# rfrsabr-{kind} v{SCHEMA_VERSION}"


def render_csv(frame: pd.DataFrame, kind: str) -> str:
    """Render a report frame with its schema line; columns must match the schema exactly."""
    columns = SCHEMAS[kind]
    if list(frame.columns) != columns:
        raise ConfigError([f"{kind} report columns {list(frame.columns)} differ from schema {columns}"])
    buffer = io.StringIO()
    buffer.write(schema_line(kind) + "\n")
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


def write_csv(frame: pd.DataFrame, file_path: str, kind: str) -> str:
    """Write a report CSV atomically."""
    text = render_csv(frame, kind)
    atomic_write_text(file_path, text)
    logger.info(f"wrote {len(frame)} row(s) to {file_path}")
    return file_path


def read_report(file_path: str, kind: Optional[str] = None) -> pd.DataFrame:
    """Read a CSV written by write_csv, checking the schema line when kind is given."""
    with open(file_path, "r", encoding="utf-8") as f:
        first = f.readline().strip()
    if kind is not None and first != schema_line(kind):
        raise ConfigError([f"{file_path}: expected schema line {schema_line(kind)!r}, found {first!r}"])
    return pd.read_csv(file_path, comment="#")


def write_json(payload: dict, file_path: str) -> str:
    save_json(file_path, payload)
    logger.info(f"wrote report to {file_path}")
    return file_path
