"""Polynomial mapping from indicator differences to estimated output differences."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError, MissingRescaler


@dataclass(frozen=True)
class PolyRescaler:
    """``f(x) = a_0 + a_1 x + ... + a_n x^n``; ``coefficients`` are lowest order first."""

    coefficients: tuple[float, ...]
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("a polynomial needs at least one coefficient")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: float) -> float:
        return evaluate(self, x)

    @classmethod
    def identity(cls) -> "PolyRescaler":
        return cls((0.0, 1.0))


def evaluate(rescaler: PolyRescaler, x: float) -> float:
    acc = 0.0
    for c in reversed(rescaler.coefficients):
        acc = acc * x + c
    return acc


def save_rescaler(rescaler: PolyRescaler, path) -> None:
    """Write a small JSON document; floats are written with round-trip precision."""
    doc = {
        "order": rescaler.order,
        "coefficients": list(rescaler.coefficients),
        "provenance": rescaler.provenance,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_rescaler(path) -> PolyRescaler:
    path = Path(path)
    if not path.is_file():
        raise MissingRescaler(f"rescaler file not found: {path}")
    try:
        doc = json.loads(path.read_text())
        coeffs = tuple(doc["coefficients"])
        order = int(doc["order"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed rescaler file {path}: {exc}") from exc
    if len(coeffs) != order + 1:
        raise FormatError(f"rescaler order {order} does not match {len(coeffs)} coefficients")
    return PolyRescaler(coeffs, doc.get("provenance", {}))
