"""File IO helpers: output dirs, JSON text files, NDJSON traces and CSV summaries. No hardcoded absolute paths."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable, Mapping, Union

import numpy as np
import pandas as pd


def ensure_dirs(path: Path) -> None:
    """Create parent directories for path if they do not exist."""
    path.parent.mkdir(parents=True, exist_ok=True)


def ensure_serializable(obj: Any) -> Any:
    """Convert numpy types to native Python for JSON."""
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer, np.floating)):
        return float(obj) if isinstance(obj, np.floating) else int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Mapping):
        return {str(k): ensure_serializable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [ensure_serializable(x) for x in obj]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def read_text(path: Union[str, Path]) -> str:
    p = Path(path).resolve()
    if not p.exists():
        raise FileNotFoundError(f"Input not found: {p}")
    return p.read_text(encoding="utf-8")


def write_text(text: str, path: Union[str, Path]) -> Path:
    """Write UTF-8 text; ensure parent folders exist."""
    p = Path(path).resolve()
    ensure_dirs(p)
    p.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    return p


def write_ndjson(records: Iterable[Mapping[str, Any]], path: Union[str, Path]) -> Path:
    """One JSON object per line, column order taken from the first record."""
    p = Path(path).resolve()
    ensure_dirs(p)
    df = pd.DataFrame([ensure_serializable(r) for r in records])
    if df.empty:
        p.write_text("", encoding="utf-8")
        return p
    df.to_json(p, orient="records", lines=True, double_precision=15)
    return p


def read_ndjson(path: Union[str, Path]) -> pd.DataFrame:
    p = Path(path).resolve()
    if not p.exists() or p.stat().st_size == 0:
        return pd.DataFrame()
    return pd.read_json(p, orient="records", lines=True)


def write_csv(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    p = Path(path).resolve()
    ensure_dirs(p)
    df.to_csv(p, index=False)
    return p
