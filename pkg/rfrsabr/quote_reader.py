"""Module for reading caplet quote files."""

import json
import logging
import math
import os
from typing import Any, Dict, List

import pandas as pd

from .calibration import QuoteEntry, QuoteKind, QuoteSet
from .errors import QuoteFileError
from .model_core import CapletStyle

logger = logging.getLogger(__name__)

QUOTE_COLUMNS = ["strike", "style", "quote_kind", "value", "weight"]


def read_quotes(file_path: str) -> List[QuoteEntry]:
    """Read quote entries from a CSV or JSON file.

    Args:
        file_path: Path to a .csv file with header strike,style,quote_kind,value,weight
            or a .json file holding a list of such records (or {"entries": [...]})

    Returns:
        Entries in file order; row numbers in errors are 1-based data rows
    """
    if not os.path.exists(file_path):
        raise QuoteFileError([f"quote file not found: {file_path}"])
    file_ext = os.path.splitext(file_path)[1].lower()
    if file_ext == ".json":
        records = read_json_quotes(file_path)
    else:
        records = read_csv_quotes(file_path)
    entries = parse_records(records)
    logger.info(f"read {len(entries)} quote(s) from {file_path}")
    return entries


def read_csv_quotes(file_path: str) -> List[Dict[str, Any]]:
    try:
        frame = pd.read_csv(file_path, comment="#", skipinitialspace=True, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise QuoteFileError([f"cannot parse {file_path}: {e}"])
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in QUOTE_COLUMNS if c not in frame.columns]
    if missing:
        raise QuoteFileError([f"missing column(s) {missing}; expected header {','.join(QUOTE_COLUMNS)}"])
    return frame[QUOTE_COLUMNS].to_dict(orient="records")


def read_json_quotes(file_path: str) -> List[Dict[str, Any]]:
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise QuoteFileError([f"cannot parse {file_path}: {e}"])
    if isinstance(doc, dict):
        doc = doc.get("entries")
    if not isinstance(doc, list) or not all(isinstance(r, dict) for r in doc):
        raise QuoteFileError(["JSON quotes must be a list of objects or {\"entries\": [...]}"])
    return doc


def _number(raw: Any) -> float:
    if isinstance(raw, bool):
        raise ValueError(raw)
    value = float(str(raw).strip()) if not isinstance(raw, (int, float)) else float(raw)
    if not math.isfinite(value):
        raise ValueError(raw)
    return value


def parse_records(records: List[Dict[str, Any]]) -> List[QuoteEntry]:
    """Validate raw records against the quote schema, reporting every bad row."""
    entries, messages, rows = [], [], []
    if not records:
        raise QuoteFileError(["quote file holds no quotes"])
    for row, record in enumerate(records, start=1):
        problems = []
        try:
            strike = _number(record.get("strike"))
        except (TypeError, ValueError):
            problems.append(f"strike {record.get('strike')!r} is not a number")
        try:
            value = _number(record.get("value"))
        except (TypeError, ValueError):
            problems.append(f"value {record.get('value')!r} is not a number")
        raw_weight = record.get("weight", "")
        try:
            weight = 1.0 if raw_weight in ("", None) else _number(raw_weight)
            if weight < 0:
                problems.append(f"weight {weight!r} is negative")
        except (TypeError, ValueError):
            problems.append(f"weight {raw_weight!r} is not a number")
        try:
            style = CapletStyle(str(record.get("style", "")).strip().lower())
        except ValueError:
            problems.append(f"style {record.get('style')!r} is not one of backward, forward")
        try:
            kind = QuoteKind(str(record.get("quote_kind", "")).strip().lower())
        except ValueError:
            problems.append(f"quote_kind {record.get('quote_kind')!r} is not one of implied_vol, pv")

        if problems:
            messages.extend(f"row {row}: {p}" for p in problems)
            rows.append(row)
            continue
        entries.append(QuoteEntry(strike=strike, style=style, quote_kind=kind, value=value, weight=weight))

    if messages:
        raise QuoteFileError(messages, rows)
    return entries


def build_quote_set(entries: List[QuoteEntry], run) -> QuoteSet:
    """Attach the period, forward rate, discount and shift of a run configuration."""
    try:
        return QuoteSet(
            entries=entries,
            period=run.period,
            forward_rate=run.forward_rate,
            discount=run.discount,
            shift=run.params.shift,
        )
    except QuoteFileError as e:
        raise QuoteFileError([m.replace("entry ", "row ", 1) for m in e.messages], e.rows)
