"""CSV ingestion and JSON rendering for the command line and the service."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .im import IntervalEstimate


@dataclass(frozen=True)
class ShotRecord:
    player: str
    made: int
    attempts: int


def _sniff_delimiter(text: str) -> str:
    first = text.splitlines()[0] if text.strip() else ""
    return "\t" if "\t" in first and "," not in first else ","


def read_table(source, required: list[str]) -> list[dict]:
    """Rows of a headed CSV/TSV file as dicts; any malformed row aborts."""
    if isinstance(source, io.StringIO):
        text = source.getvalue()
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise DataError(f"cannot read {source}: {exc.strerror or exc}") from None
    if not text.strip():
        raise DataError("input file is empty")
    reader = csv.DictReader(io.StringIO(text), delimiter=_sniff_delimiter(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError(f"missing column(s) {missing}; found {header}")
    rows = []
    for lineno, raw in enumerate(reader, start=2):
        row = {(k or "").strip(): (v.strip() if isinstance(v, str) else v) for k, v in raw.items()}
        if None in raw or any(row.get(c) in (None, "") for c in required):
            raise DataError(f"line {lineno}: malformed row")
        rows.append(row)
    if not rows:
        raise DataError("input file has a header but no rows")
    return rows


def _number(value: str, lineno: int, column: str, integer: bool = False):
    try:
        out = float(value)
    except ValueError:
        raise DataError(f"row {lineno}: column {column!r} is not numeric: {value!r}") from None
    if not math.isfinite(out):
        raise DataError(f"row {lineno}: column {column!r} is not finite")
    if integer:
        if out != int(out):
            raise DataError(f"row {lineno}: column {column!r} must be an integer")
        return int(out)
    return out


def load_normal(source) -> list[float]:
    rows = read_table(source, ["x"])
    return [_number(r["x"], i + 2, "x") for i, r in enumerate(rows)]


def load_poisson(source) -> tuple[list[int], list[float]]:
    rows = read_table(source, ["x", "t"])
    counts = [_number(r["x"], i + 2, "x", integer=True) for i, r in enumerate(rows)]
    exposures = [_number(r["t"], i + 2, "t") for i, r in enumerate(rows)]
    return counts, exposures


def load_shots(source) -> list[ShotRecord]:
    rows = read_table(source, ["player", "made", "attempts"])
    out = []
    for i, r in enumerate(rows):
        made = _number(r["made"], i + 2, "made", integer=True)
        attempts = _number(r["attempts"], i + 2, "attempts", integer=True)
        if made < 0 or attempts <= 0:
            raise DataError(f"row {i + 2}: made must be >= 0 and attempts > 0")
        if made > attempts:
            warnings.warn(f"row {i + 2}: {r['player']} made more shots than attempted", UserWarning, stacklevel=2)
        out.append(ShotRecord(r["player"], made, attempts))
    return out


def interval_record(iv: IntervalEstimate, parameter: str, seed: int | None = None, **extra) -> dict:
    out = {
        "method": iv.method,
        "parameter": parameter,
        "point": iv.point,
        "lower": iv.lower,
        "upper": iv.upper,
        "level": iv.level,
        "seed": seed,
        "diagnostics": _jsonable(iv.diagnostics),
    }
    out.update(extra)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False)
