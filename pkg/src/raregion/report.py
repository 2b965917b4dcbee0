"""Verdicts, witnesses and condition reports shared by the verifiers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

PASS = "pass"
FAIL = "fail"
INDETERMINATE = "indeterminate"
SKIPPED = "skipped"

CERTIFIED = "certified within box"
REFUTED = "refuted"

EXIT_CODES = {CERTIFIED: 0, REFUTED: 1, INDETERMINATE: 2}
EXIT_INPUT_ERROR = 3


def fmt(x: float) -> float:
    """Round to 9 significant digits for stable serialisation."""
    x = float(x)
    if x == 0 or not np.isfinite(x):
        return 0.0 if x == 0 else x
    return float(f"{x:.9g}")


def fmt_point(p) -> list[float]:
    return [fmt(v) for v in np.asarray(p, dtype=float).ravel()]


@dataclass
class Witness:
    condition: str
    points: list[list[float]]
    diagnostic: str
    data: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"condition": self.condition, "points": [fmt_point(p) for p in self.points],
               "diagnostic": self.diagnostic}
        if self.data:
            out["data"] = _clean(self.data)
        return out

    def sort_key(self):
        # rounded so that float noise near zero cannot reorder witnesses
        pts = [tuple(float(v) for v in np.round(np.asarray(p, dtype=float), 6) + 0.0) for p in self.points]
        return (self.condition, pts, self.diagnostic)


@dataclass
class ConditionResult:
    name: str
    verdict: str
    witnesses: list[Witness] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        ws = sorted(self.witnesses, key=Witness.sort_key)
        return {"name": self.name, "verdict": self.verdict,
                "witnesses": [w.to_dict() for w in ws], "notes": list(self.notes)}


def combine(verdicts: Sequence[str]) -> str:
    """Worst verdict: fail > indeterminate > pass (skipped counts as indeterminate)."""
    if FAIL in verdicts:
        return FAIL
    if INDETERMINATE in verdicts or SKIPPED in verdicts:
        return INDETERMINATE
    return PASS


@dataclass
class ConditionReport:
    conditions: list[ConditionResult] = field(default_factory=list)
    caveats: list[str] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.conditions)

    def add(self, result: ConditionResult) -> ConditionResult:
        self.conditions.append(result)
        return result

    @property
    def witnesses(self) -> list[Witness]:
        return [w for c in self.conditions for w in c.witnesses]

    @property
    def overall(self) -> str:
        v = combine([c.verdict for c in self.conditions])
        return {PASS: CERTIFIED, FAIL: REFUTED, INDETERMINATE: INDETERMINATE}[v]

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.overall]

    def to_dict(self) -> dict:
        return {"overall": self.overall,
                "conditions": [c.to_dict() for c in self.conditions],
                "caveats": sorted(set(self.caveats)),
                "meta": _clean(self.meta)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        width = max([len(c.name) for c in self.conditions] + [9])
        lines = [f"{'condition':<{width}}  verdict        witnesses"]
        for c in self.conditions:
            lines.append(f"{c.name:<{width}}  {c.verdict:<13}  {len(c.witnesses)}")
        lines.append(f"overall: {self.overall}")
        for cav in sorted(set(self.caveats)):
            lines.append(f"caveat: {cav}")
        return "\n".join(lines) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    return obj
