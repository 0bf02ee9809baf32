"""JSON configuration loading with exact rational fields.

Numbers may be given as JSON integers or as strings holding a decimal
(``"-513.9303"``) or a ratio (``"1/3"``).  JSON floats are accepted through
their shortest decimal repr, never through their binary value.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from fxguard.fixedpoint import FixedPointSpec


class ConfigError(ValueError):
    """Malformed configuration; ``where`` names the line or field."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


def load(path: str | Path) -> tuple[dict[str, Any], str]:
    """Parse a JSON config; returns the document and the sha256 of its bytes."""
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object", "line 1")
    return doc, hashlib.sha256(raw).hexdigest()


def rational(value: Any, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ConfigError("expected a number, got a boolean", where)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"cannot read {value!r} as an exact rational", where) from None
    raise ConfigError(f"expected a number or numeric string, got {type(value).__name__}", where)


def vector(value: Any, where: str) -> tuple[Fraction, ...]:
    if not isinstance(value, list):
        raise ConfigError("expected a list", where)
    return tuple(rational(v, f"{where}[{i}]") for i, v in enumerate(value))


def matrix(value: Any, where: str) -> tuple[tuple[Fraction, ...], ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a non-empty list of rows", where)
    rows = tuple(vector(r, f"{where}[{i}]") for i, r in enumerate(value))
    if len({len(r) for r in rows}) != 1:
        raise ConfigError("rows have different lengths", where)
    return rows


def require(doc: dict, key: str, where: str = "") -> Any:
    if not isinstance(doc, dict):
        raise ConfigError("expected an object", where or "<root>")
    if key not in doc:
        raise ConfigError("missing required field", f"{where}.{key}" if where else key)
    return doc[key]


def spec(value: Any, where: str) -> FixedPointSpec:
    if not isinstance(value, dict):
        raise ConfigError("expected an object with p and q", where)
    p, q = require(value, "p", where), require(value, "q", where)
    if not (isinstance(p, int) and isinstance(q, int)) or isinstance(p, bool) or isinstance(q, bool):
        raise ConfigError("p and q must be integers", where)
    try:
        return FixedPointSpec(p, q)
    except ValueError as exc:
        raise ConfigError(str(exc), where) from None


def spec_list(doc: dict) -> list[FixedPointSpec]:
    """Rows under ``specs`` (a list) or a single ``spec`` object."""
    if "specs" in doc:
        rows = doc["specs"]
        if not isinstance(rows, list):
            raise ConfigError("expected a list", "specs")
        return [spec(r, f"specs[{i}]") for i, r in enumerate(rows)]
    if "spec" in doc:
        return [spec(doc["spec"], "spec")]
    raise ConfigError("missing required field", "specs")


def render(value: Fraction) -> str:
    """Exact ``num/den`` text for reports."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"
