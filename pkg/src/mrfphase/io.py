"""Exact theta serialisation and versioned CSV output."""

from __future__ import annotations

import csv
import io
import json
import sys
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .model import ThetaVector

SCHEMA_VERSION = 1


def number_to_text(v) -> str:
    """Decimal text that round-trips: repr for floats, 'p/q' for fractions."""
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def text_to_number(s):
    if isinstance(s, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(s, int):
        return Fraction(s)
    if isinstance(s, float):
        return s
    s = str(s).strip()
    if "/" in s:
        return Fraction(s)
    try:
        return Fraction(int(s))
    except ValueError:
        return float(s)


def theta_to_json(theta: ThetaVector) -> str:
    return json.dumps({"delta": theta.delta, "theta": [number_to_text(v) for v in theta.values]})


def theta_from_values(values: Sequence, delta: Optional[int] = None) -> ThetaVector:
    nums = tuple(text_to_number(v) for v in values)
    d = len(nums) - 1 if delta is None else delta
    return ThetaVector(d, nums)


def theta_from_json(text: str) -> ThetaVector:
    """Accepts either a bare array or an object with a 'theta' key."""
    obj = json.loads(text)
    if isinstance(obj, dict):
        if "theta" not in obj:
            raise ValueError("theta JSON object needs a 'theta' key")
        return theta_from_values(obj["theta"], obj.get("delta"))
    if isinstance(obj, list):
        return theta_from_values(obj)
    raise ValueError("theta JSON must be an array or an object")


def write_csv(rows: Iterable[dict], columns: Sequence[str], path: Optional[str] = None) -> str:
    """Write rows with a leading schema_version column; returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["schema_version", *columns])
    for row in rows:
        writer.writerow([SCHEMA_VERSION, *(_cell(row.get(c)) for c in columns)])
    text = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, Fraction)):
        return number_to_text(v)
    return str(v)


def read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def to_jsonable(obj):
    """Recursively convert fractions, numpy scalars and tuples for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return number_to_text(obj)
    if hasattr(obj, "tolist"):
        return to_jsonable(obj.tolist())
    if isinstance(obj, float) and obj != obj:
        return None
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return "inf" if obj > 0 else "-inf"
    return obj


def dump_json(obj, path: Optional[str] = None) -> str:
    text = json.dumps(to_jsonable(obj), indent=2)
    if path is None or path == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
