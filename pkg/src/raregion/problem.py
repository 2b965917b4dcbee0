"""Problem files.

A problem is a TOML document.  Top-level keys:

    dimension = 3                       # ambient n (required)
    seed = [0, 0, 0]                    # a point of the region (required)
    box = [[-2, 2], [-2, 2], [-2, 2]]   # one [lo, hi] per axis (required)

    [[surface]]                         # one table per surface, at least one
    label = "S1"
    poly = "1 - (x1 - 1/2)^2 - x2^2"   # polynomial text, variables x1..xn
    block = 1                           # optional, 1-based block index
    support = [1, 2]                    # optional support override

    [decomposition]                     # optional
    blocks = [[1, 2], [1, 3]]
    block_seeds = [[0, 0], [0, 0]]      # optional, must agree with seed
    mode = "thm1"                       # "thm1" or "thm3"
    b = 1

    [tolerances]                        # optional
    zero = 1e-9
    rank = 1e-6
    grid_res = 64

    [moment_map]                        # optional
    ls = [1, 2]                         # group of each surface
    d = [0, 0]                          # sphere dimension of each group
    fiber_points = 100                  # number of base points sampled

    [reeb]                              # optional
    coord = 1

    [classify]                          # optional
    N = [[1], [1, 2]]

Numbers may be written as strings holding a rational ("1/10").  Unknown
keys are rejected.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .decomposition import BlockFamily, DecompositionInput
from .geometry import Box, Tolerances
from .momentmap import MomentMapInput
from .poly import parse
from .region import CylinderSurface, RegionSpec


class ProblemError(ValueError):
    """Malformed problem file."""


TOP_KEYS = {"dimension", "seed", "box", "surface", "decomposition", "tolerances",
            "moment_map", "reeb", "classify"}
SECTION_KEYS = {
    "surface": {"label", "poly", "block", "support"},
    "decomposition": {"blocks", "block_seeds", "mode", "b"},
    "tolerances": {"zero", "rank", "grid_res"},
    "moment_map": {"ls", "d", "fiber_points"},
    "reeb": {"coord"},
    "classify": {"N"},
}


@dataclass
class Problem:
    n: int
    surfaces: tuple[CylinderSurface, ...]
    seed: tuple[float, ...]
    box: Box
    tol: Tolerances = Tolerances()
    blocks: tuple[tuple[int, ...], ...] | None = None
    assignment: tuple[int, ...] | None = None
    block_seeds: tuple[tuple[float, ...], ...] | None = None
    mode: str = "thm1"
    b: int = 1
    ls: tuple[int, ...] | None = None
    d: tuple[int, ...] | None = None
    fiber_points: int = 100
    reeb_coord: int = 1
    classify_N: list[tuple[int, ...]] = field(default_factory=list)

    def with_tolerances(self, zero=None, rank=None, grid_res=None) -> "Problem":
        kw = {}
        if zero is not None:
            kw["zero_tol"] = zero
        if rank is not None:
            kw["rank_rel_tol"] = rank
        if grid_res is not None:
            kw["grid_res"] = grid_res
        try:
            return replace(self, tol=replace(self.tol, **kw))
        except ValueError as exc:
            raise ProblemError(str(exc)) from exc

    def region(self) -> RegionSpec:
        return RegionSpec(self.n, self.surfaces, self.seed, self.box, self.tol)

    def decomposition(self) -> DecompositionInput:
        if self.blocks is None:
            raise ProblemError("problem has no [decomposition] section")
        if self.assignment is None:
            raise ProblemError("every surface needs a 'block' when blocks are given")
        return DecompositionInput(self.surfaces, BlockFamily(self.blocks, self.n), self.assignment,
                                  self.box, self.seed, self.block_seeds, self.tol)

    def moment_map(self) -> MomentMapInput:
        if self.ls is None:
            raise ProblemError("problem has no [moment_map] section")
        return MomentMapInput(self.region(), self.ls, self.d)


def _number(v, where: str) -> float:
    if isinstance(v, bool):
        raise ProblemError(f"{where}: expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ProblemError(f"{where}: cannot read {v!r} as a number") from exc
    raise ProblemError(f"{where}: expected a number")


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ProblemError(f"{where}: expected an integer")
    return v


def _int_list(v, where: str) -> tuple[int, ...]:
    if not isinstance(v, list):
        raise ProblemError(f"{where}: expected a list of integers")
    return tuple(_int(x, where) for x in v)


def _check_keys(table: dict, allowed: set, where: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ProblemError(f"{where}: unknown key(s) {', '.join(extra)}")


def from_dict(doc: dict) -> Problem:
    _check_keys(doc, TOP_KEYS, "problem")
    for key in ("dimension", "seed", "box", "surface"):
        if key not in doc:
            raise ProblemError(f"problem: missing required key '{key}'")
    n = _int(doc["dimension"], "dimension")
    if n < 1:
        raise ProblemError("dimension must be positive")
    seed = doc["seed"]
    if not isinstance(seed, list) or len(seed) != n:
        raise ProblemError(f"seed: expected {n} numbers")
    seed = tuple(_number(v, "seed") for v in seed)
    box = doc["box"]
    if not isinstance(box, list) or len(box) != n or not all(isinstance(r, list) and len(r) == 2 for r in box):
        raise ProblemError(f"box: expected {n} [lo, hi] pairs")
    try:
        box = Box(tuple(_number(r[0], "box") for r in box), tuple(_number(r[1], "box") for r in box))
    except ValueError as exc:
        raise ProblemError(f"box: {exc}") from exc

    tol = Tolerances()
    if "tolerances" in doc:
        t = doc["tolerances"]
        _check_keys(t, SECTION_KEYS["tolerances"], "tolerances")
        kw = {}
        if "zero" in t:
            kw["zero_tol"] = _number(t["zero"], "tolerances.zero")
        if "rank" in t:
            kw["rank_rel_tol"] = _number(t["rank"], "tolerances.rank")
        if "grid_res" in t:
            kw["grid_res"] = _int(t["grid_res"], "tolerances.grid_res")
        try:
            tol = Tolerances(**kw)
        except ValueError as exc:
            raise ProblemError(f"tolerances: {exc}") from exc

    raw = doc["surface"]
    if not isinstance(raw, list) or not raw:
        raise ProblemError("surface: at least one [[surface]] table is required")
    surfaces, blocks_of = [], []
    labels = set()
    for k, s in enumerate(raw, 1):
        where = f"surface {k}"
        _check_keys(s, SECTION_KEYS["surface"], where)
        if "poly" not in s:
            raise ProblemError(f"{where}: missing 'poly'")
        label = str(s.get("label", f"S{k}"))
        if label in labels:
            raise ProblemError(f"{where}: duplicate label {label!r}")
        labels.add(label)
        f = parse(str(s["poly"]), n)
        sup = _int_list(s["support"], f"{where}.support") if "support" in s else None
        if sup is not None and not all(1 <= c <= n for c in sup):
            raise ProblemError(f"{where}.support: indices must lie in 1..{n}")
        surfaces.append(CylinderSurface(label, f, sup))
        blocks_of.append(_int(s["block"], f"{where}.block") if "block" in s else None)

    prob = Problem(n, tuple(surfaces), seed, box, tol)
    if "decomposition" in doc:
        dec = doc["decomposition"]
        _check_keys(dec, SECTION_KEYS["decomposition"], "decomposition")
        if "blocks" not in dec or not isinstance(dec["blocks"], list):
            raise ProblemError("decomposition: 'blocks' is required")
        prob.blocks = tuple(_int_list(b, "decomposition.blocks") for b in dec["blocks"])
        if any(v is None for v in blocks_of):
            raise ProblemError("decomposition: every surface needs a 'block'")
        if not all(1 <= v <= len(prob.blocks) for v in blocks_of):
            raise ProblemError("surface.block: index out of range")
        prob.assignment = tuple(v - 1 for v in blocks_of)
        if "block_seeds" in dec:
            bs = dec["block_seeds"]
            if not isinstance(bs, list) or len(bs) != len(prob.blocks):
                raise ProblemError("decomposition.block_seeds: one seed per block expected")
            prob.block_seeds = tuple(tuple(_number(v, "block_seeds") for v in s) for s in bs)
        prob.mode = str(dec.get("mode", "thm1"))
        if prob.mode not in ("thm1", "thm3"):
            raise ProblemError("decomposition.mode must be 'thm1' or 'thm3'")
        prob.b = _int(dec.get("b", 1), "decomposition.b")
    elif any(v is not None for v in blocks_of):
        raise ProblemError("surface.block given without a [decomposition] section")
    if "moment_map" in doc:
        mm = doc["moment_map"]
        _check_keys(mm, SECTION_KEYS["moment_map"], "moment_map")
        if "ls" not in mm:
            raise ProblemError("moment_map: 'ls' is required")
        prob.ls = _int_list(mm["ls"], "moment_map.ls")
        prob.d = _int_list(mm["d"], "moment_map.d") if "d" in mm else (0,) * max(prob.ls, default=0)
        prob.fiber_points = _int(mm.get("fiber_points", 100), "moment_map.fiber_points")
    if "reeb" in doc:
        _check_keys(doc["reeb"], SECTION_KEYS["reeb"], "reeb")
        prob.reeb_coord = _int(doc["reeb"].get("coord", 1), "reeb.coord")
    if "classify" in doc:
        _check_keys(doc["classify"], SECTION_KEYS["classify"], "classify")
        prob.classify_N = [_int_list(N, "classify.N") for N in doc["classify"].get("N", [])]
    return prob


def loads(text: str) -> Problem:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ProblemError(f"not valid TOML: {exc}") from exc
    return from_dict(doc)


def load(path) -> Problem:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc}") from exc
    return loads(text)
