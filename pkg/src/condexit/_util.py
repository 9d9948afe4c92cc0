"""Small shared helpers: exact-number formatting, hashing, resource caps."""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction


class CapExceeded(RuntimeError):
    """An instance is too large for the configured size cap."""


def frac_str(x) -> str:
    """``"num/den"`` for rationals, ``repr`` for floats."""
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return f"{x}/1"
    return repr(float(x))


def parse_frac(s: str):
    if "/" in s:
        num, den = s.split("/")
        return Fraction(int(num), int(den))
    return float(s)


def number_record(x) -> dict:
    if isinstance(x, (Fraction, int)):
        x = Fraction(x)
        return {"num": str(x.numerator), "den": str(x.denominator), "float": float(x)}
    return {"float": float(x)}


def content_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
