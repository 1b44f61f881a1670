"""Check/report containers shared by the verification routines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    return v


@dataclass
class Check:
    """One verified quantity.

    ``value`` is compared with ``tolerance`` according to ``relation``:
    ``"<="`` (value must not exceed tolerance) or ``">="`` (value must reach it).
    """

    name: str
    value: float
    tolerance: float
    relation: str = "<="
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        v = float(self.value)
        if not np.isfinite(v):
            return False
        return v <= self.tolerance if self.relation == "<=" else v >= self.tolerance

    def to_dict(self):
        return {
            "name": self.name,
            "value": _plain(float(self.value)),
            "tolerance": _plain(float(self.tolerance)),
            "relation": self.relation,
            "passed": self.passed,
            **({"detail": _plain(self.detail)} if self.detail else {}),
        }

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {float(self.value):.6g} {self.relation} {float(self.tolerance):.6g}"


@dataclass
class Report:
    """Ordered collection of checks plus free-form data."""

    title: str
    checks: list = field(default_factory=list)
    data: dict[str, Any] = field(default_factory=dict)

    def add(self, name, value, tolerance, relation="<=", **detail) -> Check:
        c = Check(name, value, tolerance, relation, detail)
        self.checks.append(c)
        return c

    def extend(self, other: "Report", prefix: str = ""):
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.value, c.tolerance, c.relation, c.detail))

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "data": _plain(self.data),
        }

    def summary(self) -> str:
        return "\n".join([self.title] + ["  " + c.line() for c in self.checks])
