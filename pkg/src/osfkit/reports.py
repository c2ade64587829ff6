"""Structured verdicts shared by the finite checks, the Monte Carlo studies and the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

PASS = "pass"
FAIL = "fail"
VACUOUS = "vacuous"


@dataclass
class CheckReport:
    """Outcome of one named check.

    ``details`` holds one record per time, block or basis element examined;
    each record carries its own ``verdict``.  A failing report always names
    a ``witness``.
    """

    name: str
    verdict: str = PASS
    details: list = field(default_factory=list)
    witness: Any = None
    estimates: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict != FAIL

    def add(self, verdict: str, **info):
        self.details.append({"verdict": verdict, **info})
        if verdict == FAIL and self.witness is None:
            self.witness = info

    def settle(self) -> "CheckReport":
        """Derive the overall verdict from the detail records."""
        verdicts = {d["verdict"] for d in self.details}
        if FAIL in verdicts:
            self.verdict = FAIL
        elif PASS in verdicts:
            self.verdict = PASS
        else:
            self.verdict = VACUOUS
        return self

    def to_dict(self) -> dict:
        return to_jsonable({
            "name": self.name,
            "verdict": self.verdict,
            "details": self.details,
            "witness": self.witness,
            "estimates": self.estimates,
            "notes": self.notes,
        })


def merge(name: str, reports) -> CheckReport:
    """Combine several reports into one whose details are the sub-verdicts."""
    out = CheckReport(name)
    for r in reports:
        out.add(r.verdict, check=r.name, witness=r.witness)
        out.notes.extend(r.notes)
    return out.settle()


def to_jsonable(obj):
    """Recursively convert Fractions, infinities, sets and tuples to JSON-friendly values."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return obj.numerator if obj.denominator == 1 else f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, int):
        return obj
    if hasattr(obj, "item") and callable(obj.item):
        return to_jsonable(obj.item())
    if isinstance(obj, dict):
        return {str(to_jsonable(k)) if not isinstance(k, str) else k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        items = [to_jsonable(v) for v in obj]
        try:
            return sorted(items, key=lambda v: (str(type(v)), v))
        except TypeError:
            return sorted(items, key=repr)
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return to_jsonable(obj.tolist())
    return repr(obj)
