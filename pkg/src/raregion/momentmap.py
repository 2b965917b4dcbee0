"""Manifold built from a region by adding squared fiber coordinates, and its projection.

Surfaces are grouped by a surjection ``ls``; group ``i`` contributes one
equation ``prod_{j in group i} f_j(x) - sum_k y_{i,k}^2 = 0`` with ``d_i + 1``
new variables.  Over a point x of closure(D) the fiber is a product of
spheres of radii ``sqrt(prod f_j(x))``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import norm, qmc

from . import geometry as geo
from .poly import Polynomial, embed, evaluate_exact, parse, to_text
from .region import RegionSpec, analyze, _dedupe
from .report import FAIL, PASS, ConditionResult, Witness

FIBER_POINTS = 8


class MomentMapError(ValueError):
    """Invalid surjection, exponent data or base point."""


@dataclass(frozen=True)
class MomentMapInput:
    region: RegionSpec
    ls: tuple[int, ...]  # 1-based group per surface
    d: tuple[int, ...]  # sphere dimension per group

    def __post_init__(self):
        object.__setattr__(self, "ls", tuple(int(v) for v in self.ls))
        object.__setattr__(self, "d", tuple(int(v) for v in self.d))
        if len(self.ls) != len(self.region.surfaces):
            raise MomentMapError("ls must give one group per surface")
        if any(v < 0 for v in self.d):
            raise MomentMapError("d values must be nonnegative")
        if set(self.ls) != set(range(1, len(self.d) + 1)):
            raise MomentMapError(f"ls must map onto 1..{len(self.d)}")

    @property
    def groups(self) -> int:
        return len(self.d)

    def members(self, i: int) -> tuple[int, ...]:
        """0-based surface indices in group ``i`` (1-based)."""
        return tuple(j for j, g in enumerate(self.ls) if g == i)


@dataclass(frozen=True)
class MomentMapSystem:
    n: int
    total_vars: int
    equations: tuple[Polynomial, ...]
    products: tuple[Polynomial, ...]  # the x-part of each equation
    y_blocks: tuple[tuple[int, ...], ...]  # 1-based variable indices per group

    @property
    def x_block(self) -> tuple[int, ...]:
        return tuple(range(1, self.n + 1))

    def residuals(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return geo.eval_values(self.equations, Z)

    def jacobian(self, Z) -> np.ndarray:
        return geo.eval_jacobian(self.equations, np.atleast_2d(np.asarray(Z, dtype=float)))


def _intersections(inp: MomentMapInput) -> dict[tuple[int, int], np.ndarray]:
    """Sampled points of closure(D) on two surfaces at once, per surface pair."""
    an = analyze(inp.region)
    out: dict[tuple[int, int], list] = {}
    recs = [(q, a) for q, a in zip(an.Q, an.active)] + [(r.point, r.active) for r in an.degeneracies]
    for q, a in recs:
        for pair in itertools.combinations(a, 2):
            out.setdefault(pair, []).append(q)
    # pairs not met at sampling time: refine points of one surface that nearly meet the other
    polys = inp.region.polys
    l = len(polys)
    for j1, j2 in itertools.combinations(range(l), 2):
        if (j1, j2) in out:
            continue
        rows = [k for k, a in enumerate(an.active) if j1 in a or j2 in a]
        if not rows:
            continue
        Q = an.Q[rows]
        F = np.abs(an.values(Q))
        G = np.linalg.norm(geo.eval_jacobian([polys[j1], polys[j2]], Q), axis=2)
        reach = 3 * float(np.max(an.spacing)) * np.maximum(G, 1e-12)
        near = (F[:, j1] <= reach[:, 0]) & (F[:, j2] <= reach[:, 1])
        if not near.any() or inp.region.nvars < 2:
            continue
        Z, st = geo.refine_batch(Q[near], [polys[j1], polys[j2]], inp.region.tol)
        Z = Z[st == 0]
        Z = Z[an.in_closure(Z) & an.in_box(Z) & an.near_component(Z)] if len(Z) else Z
        if len(Z):
            out[(j1, j2)] = list(Z[_dedupe(Z, 10 * inp.region.tol.zero_tol)])
    return {k: np.array(v) for k, v in sorted(out.items())}


def validate_ls(inp: MomentMapInput) -> ConditionResult:
    """Surfaces meeting inside closure(D) must lie in different groups."""
    res = ConditionResult("ls-separation", PASS, notes=["intersection search restricted to the box"])
    labels = inp.region.labels
    for (j1, j2), pts in _intersections(inp).items():
        if inp.ls[j1] == inp.ls[j2]:
            res.verdict = FAIL
            res.witnesses.append(Witness("ls-separation", [pts[0].tolist()],
                                         f"{labels[j1]} and {labels[j2]} meet in the closure but share group {inp.ls[j1]}",
                                         {"surfaces": [labels[j1], labels[j2]], "samples": len(pts)}))
    return res


def build_system(inp: MomentMapInput) -> MomentMapSystem:
    n = inp.region.nvars
    total = n + sum(di + 1 for di in inp.d)
    positions = list(range(1, n + 1))
    eqs, prods, blocks = [], [], []
    nxt = n + 1
    for i in range(1, inp.groups + 1):
        prod = Polynomial.constant(total, 1)
        for j in inp.members(i):
            prod = prod * embed(inp.region.surfaces[j].f, total, positions)
        ys = tuple(range(nxt, nxt + inp.d[i - 1] + 1))
        nxt += len(ys)
        sq = Polynomial(total, {})
        for y in ys:
            sq = sq + Polynomial.variable(total, y) ** 2
        prods.append(prod)
        eqs.append(prod - sq)
        blocks.append(ys)
    return MomentMapSystem(n, total, tuple(eqs), tuple(prods), tuple(blocks))


def _sphere(dim: int, m: int) -> np.ndarray:
    """Deterministic, well spread points on the unit ``dim``-sphere in R^(dim+1)."""
    if dim == 0:
        return np.array([[1.0], [-1.0]])
    if dim == 1:
        t = 2 * np.pi * np.arange(m) / m
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    u = qmc.Halton(d=dim + 1, scramble=False).random(m * dim + 1)[1:]
    g = norm.ppf(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def group_radii(system: MomentMapSystem, x, zero_tol: float) -> list[float]:
    x = [Fraction(float(v)) for v in x]
    full = x + [Fraction(0)] * (system.total_vars - system.n)
    out = []
    for i, p in enumerate(system.products):
        v = evaluate_exact(p, full)
        if v < -zero_tol:
            raise MomentMapError(f"base point outside the closure (group {i + 1} product {float(v):.3g})")
        out.append(float(max(v, 0)) ** 0.5)
    return out


def sample_fiber(system: MomentMapSystem, x, zero_tol: float = 1e-9, m: int = FIBER_POINTS) -> np.ndarray:
    """Points of the manifold over ``x``, one row per point (x followed by y)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (system.n,):
        raise MomentMapError(f"base point must have {system.n} coordinates")
    parts = []
    for R, ys in zip(group_radii(system, x, zero_tol), system.y_blocks):
        if R == 0.0:
            parts.append(np.zeros((1, len(ys))))
        else:
            parts.append(R * _sphere(len(ys) - 1, m))
    rows = []
    for combo in itertools.product(*parts):
        rows.append(np.concatenate([x] + list(combo)))
    return np.array(rows)


def project(system: MomentMapSystem, point, zero_tol: float = 1e-9) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    if point.shape != (system.total_vars,):
        raise MomentMapError(f"point must have {system.total_vars} coordinates")
    r = np.max(np.abs(system.residuals(point)))
    if r > zero_tol:
        raise MomentMapError(f"point is off the manifold (residual {r:.3g})")
    return point[: system.n].copy()


def jacobian_rank(system: MomentMapSystem, point, tol: geo.Tolerances) -> geo.RankInfo:
    return geo.numerical_rank(system.jacobian(point)[0], tol)


def base_points(inp: MomentMapInput, count: int = 100, interior: bool = True) -> np.ndarray:
    """Deterministic grid samples of D (interior) or refined boundary samples."""
    an = analyze(inp.region)
    if interior:
        P = an.coords(np.argwhere(an.dmask))
    else:
        P = an.Q
    if len(P) == 0:
        return P
    idx = np.unique(np.linspace(0, len(P) - 1, min(count, len(P))).round().astype(int))
    return P[idx]


def export_system(system: MomentMapSystem) -> str:
    lines = [f"vars: {system.total_vars}"]
    lines += [to_text(e) for e in system.equations]
    return "\n".join(lines) + "\n"


def parse_system(text: str) -> tuple[int, list[Polynomial]]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("vars:"):
        raise MomentMapError("missing 'vars:' header")
    nv = int(lines[0].split(":", 1)[1])
    return nv, [parse(ln, nv) for ln in lines[1:]]
