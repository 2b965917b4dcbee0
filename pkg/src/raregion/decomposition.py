"""Hypothesis checks for regions assembled from lower-dimensional blocks.

Each surface lives on a block of coordinates ``A_i``.  The block regions are
analysed in their own coordinates and their boundary data is compared along
fibers, i.e. at equal values of the coordinates two blocks share.  All block
points are kept in block-local coordinates; ``Block.local`` converts an ambient
coordinate index to a local one.
"""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .geometry import Box, Tolerances
from .poly import VarSet, relabel, varset
from .region import (BoundaryPointRecord, CylinderSurface, RegionAnalysis, RegionError,
                     RegionSpec, _cell_subsample, _dedupe, analyze, check_definition1)
from .report import (FAIL, INDETERMINATE, PASS, SKIPPED, ConditionReport, ConditionResult,
                     Witness, combine)

# records per (block, N) examined by the fiber conditions
MAX_FIBER_SOURCES = 64
MAX_NONNORMAL_SOURCES = 256
MAX_WITNESSES = 20
# separation bands, in units of zero_tol
COINCIDE = 10.0
AMBIGUOUS = 1000.0


class DecompositionError(ValueError):
    """Malformed block family, assignment or seeds."""


def worker_count() -> int:
    env = os.environ.get("RA_REGION_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class BlockFamily:
    blocks: tuple[VarSet, ...]
    n: int

    def __post_init__(self):
        blocks = tuple(varset(b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise DecompositionError("empty block family")
        for b in blocks:
            if not b or b[0] < 1 or b[-1] > self.n:
                raise DecompositionError(f"block {b} is not a nonempty subset of 1..{self.n}")
        if len(set(blocks)) != len(blocks):
            raise DecompositionError("blocks must be pairwise distinct")
        for b1, b2 in itertools.permutations(blocks, 2):
            if set(b1) < set(b2):
                raise DecompositionError(f"block {b1} is contained in {b2}")
        if set().union(*blocks) != set(range(1, self.n + 1)):
            raise DecompositionError("blocks must cover every coordinate")

    def __len__(self):
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def shared(self, i: int, i2: int) -> VarSet:
        return varset(set(self.blocks[i]) & set(self.blocks[i2]))

    def shared_coords(self, i: int) -> VarSet:
        """Coordinates of block ``i`` that belong to at least one other block."""
        out = set()
        for i2 in range(len(self.blocks)):
            if i2 != i:
                out |= set(self.shared(i, i2))
        return varset(out)


@dataclass(frozen=True)
class DecompositionInput:
    surfaces: tuple[CylinderSurface, ...]
    blocks: BlockFamily
    assignment: tuple[int, ...]
    box: Box
    seed: tuple[float, ...] | None = None
    block_seeds: tuple[tuple[float, ...] | None, ...] | None = None
    tol: Tolerances = Tolerances()

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))
        n = self.blocks.n
        if len(self.assignment) != len(self.surfaces):
            raise DecompositionError("assignment must give one block per surface")
        for a in self.assignment:
            if not 0 <= a < len(self.blocks):
                raise DecompositionError(f"assignment refers to unknown block {a + 1}")
        if self.box.dim != n:
            raise DecompositionError("box dimension differs from the block family dimension")
        if self.block_seeds is not None:
            bs = tuple(None if s is None else tuple(float(v) for v in s) for s in self.block_seeds)
            if len(bs) != len(self.blocks):
                raise DecompositionError("one seed per block expected")
            for s, b in zip(bs, self.blocks.blocks):
                if s is not None and len(s) != len(b):
                    raise DecompositionError(f"seed for block {b} has wrong length")
            object.__setattr__(self, "block_seeds", bs)
        object.__setattr__(self, "seed", self._resolve_seed())

    def _resolve_seed(self) -> tuple[float, ...]:
        n = self.blocks.n
        vals: dict[int, float] = {}
        if self.seed is not None:
            if len(self.seed) != n:
                raise DecompositionError("ambient seed has wrong length")
            vals = {c: float(v) for c, v in zip(range(1, n + 1), self.seed)}
        for s, b in zip(self.block_seeds or (), self.blocks.blocks):
            if s is None:
                continue
            for c, v in zip(b, s):
                if c in vals and abs(vals[c] - v) > 0:
                    raise DecompositionError(f"inconsistent seeds on coordinate x{c}")
                vals[c] = v
        if len(vals) != n:
            raise DecompositionError("seeds do not determine every coordinate")
        return tuple(vals[c] for c in range(1, n + 1))

    @property
    def n(self) -> int:
        return self.blocks.n

    def region_spec(self) -> RegionSpec:
        return RegionSpec(self.n, self.surfaces, self.seed, self.box, self.tol)

    def block_surfaces(self, i: int) -> tuple[int, ...]:
        return tuple(j for j, a in enumerate(self.assignment) if a == i)

    def block_spec(self, i: int) -> RegionSpec:
        A = self.blocks.blocks[i]
        surfs = []
        for j in self.block_surfaces(i):
            s = self.surfaces[j]
            ov = None
            if s.support_override is not None:
                ov = tuple(A.index(c) + 1 for c in s.support_override)
            surfs.append(CylinderSurface(s.label, relabel(s.f, A), ov))
        seed = tuple(self.seed[c - 1] for c in A)
        return RegionSpec(len(A), tuple(surfs), seed, self.box.restrict(A), self.tol)

    def permuted(self, surface_order=None, block_order=None) -> "DecompositionInput":
        """Same data with surfaces and blocks listed in another order."""
        so = list(surface_order) if surface_order is not None else list(range(len(self.surfaces)))
        bo = list(block_order) if block_order is not None else list(range(len(self.blocks)))
        new_index = {old: k for k, old in enumerate(bo)}
        blocks = BlockFamily(tuple(self.blocks.blocks[k] for k in bo), self.n)
        seeds = None if self.block_seeds is None else tuple(self.block_seeds[k] for k in bo)
        return DecompositionInput(tuple(self.surfaces[j] for j in so), blocks,
                                  tuple(new_index[self.assignment[j]] for j in so),
                                  self.box, self.seed, seeds, self.tol)

    def with_surface(self, j: int, surface: CylinderSurface) -> "DecompositionInput":
        surfs = list(self.surfaces)
        surfs[j] = surface
        return DecompositionInput(tuple(surfs), self.blocks, self.assignment, self.box,
                                  self.seed, self.block_seeds, self.tol)

    def with_extra_surface(self, surface: CylinderSurface, block: int) -> "DecompositionInput":
        return DecompositionInput(self.surfaces + (surface,), self.blocks, self.assignment + (block,),
                                  self.box, self.seed, self.block_seeds, self.tol)


class Block:
    def __init__(self, inp: DecompositionInput, i: int):
        self.index = i
        self.coords = inp.blocks.blocks[i]
        self.surfaces = inp.block_surfaces(i)
        self.error = ""
        try:
            self.spec: RegionSpec | None = inp.block_spec(i)
        except (ValueError, RegionError) as exc:
            self.spec, self.error = None, str(exc)

    @property
    def ok(self) -> bool:
        return self.spec is not None

    @cached_property
    def analysis(self) -> RegionAnalysis:
        return analyze(self.spec)

    def local(self, c: int) -> int:
        return self.coords.index(c) + 1

    def localset(self, N) -> VarSet:
        return tuple(self.local(c) for c in varset(N))

    def ambient(self, q) -> dict[int, float]:
        return {c: float(v) for c, v in zip(self.coords, q)}

    @cached_property
    def nonnormal(self) -> list[BoundaryPointRecord]:
        an = self.analysis
        recs = [r for r in an.sample_records if not r.is_normal] + [r for r in an.degeneracies if not r.is_normal]
        if not recs:
            return []
        P = np.array([r.point for r in recs])
        recs = [recs[i] for i in _dedupe(P, COINCIDE * an.tol.zero_tol)]
        return sorted(recs, key=BoundaryPointRecord.sort_key)


def _subsample(recs: list, cap: int) -> list:
    if len(recs) <= cap:
        return recs
    idx = np.linspace(0, len(recs) - 1, cap).round().astype(int)
    return [recs[i] for i in np.unique(idx)]


def _npoint_status(rec: BoundaryPointRecord, N: VarSet, tol: Tolerances) -> str:
    """pass when ``rec`` is an N-point, fail when it is not, indeterminate inside the rank band."""
    if not rec.is_normal:
        return FAIL
    if rec.frame.indeterminate:
        return INDETERMINATE
    s = geo.meet_sine(rec.frame, N)
    band = np.sqrt(tol.indeterminate_factor)
    if s < tol.rank_rel_tol / band:
        return FAIL
    if s < tol.rank_rel_tol * band:
        return INDETERMINATE
    return PASS


@dataclass
class Fiber:
    records: list[BoundaryPointRecord]
    ambiguous: bool


class Checker:
    """Shared block analyses and fiber slices for one input and intersection bound."""

    def __init__(self, inp: DecompositionInput, b: int = 1):
        self.inp = inp
        self.b = b
        self.tol = inp.tol
        self.blocks = [Block(inp, i) for i in range(len(inp.blocks))]
        self._fibers: dict = {}
        ready = [blk.spec for blk in self.blocks if blk.ok and self._seed_ok(blk)]
        if len(ready) > 1 and worker_count() > 1:
            with ThreadPoolExecutor(worker_count()) as ex:
                list(ex.map(_safe_analyze, ready))

    @staticmethod
    def _seed_ok(blk: Block) -> bool:
        try:
            blk.spec.check_seed()
        except RegionError as exc:
            blk.error = str(exc)
            return False
        return True

    @property
    def ready(self) -> bool:
        return all(blk.ok and not blk.error for blk in self.blocks)

    def label(self, i: int) -> list[int]:
        return list(self.blocks[i].coords)

    def pool(self, i: int) -> list[BoundaryPointRecord]:
        """Exactly located boundary points of block ``i`` used to resolve fibers."""
        return self._pool(i)

    @lru_cache(maxsize=None)
    def _pool(self, i: int) -> list[BoundaryPointRecord]:
        blk = self.blocks[i]
        an = blk.analysis
        recs = list(an.sample_records) + list(an.degeneracies)
        shared = self.inp.blocks.shared_coords(i)
        for k in range(1, min(self.b, len(shared)) + 1):
            for N in itertools.combinations(shared, k):
                if len(N) + 1 <= len(blk.coords):
                    recs.extend(an.critical(blk.localset(N)).records)
        return recs

    def fiber(self, i: int, q, i2: int) -> Fiber | None:
        """Boundary points of block ``i2`` over the point ``q`` of block ``i``; None if unconstrained."""
        src, dst = self.blocks[i], self.blocks[i2]
        shared = self.inp.blocks.shared(i, i2)
        if not shared:
            return None
        pins = {dst.local(c): float(q[src.local(c) - 1]) for c in shared}
        key = (i2, tuple(sorted((k, round(v, 12)) for k, v in pins.items())))
        if key in self._fibers:
            return self._fibers[key]
        zt = self.tol.zero_tol
        cols = np.array([k - 1 for k in pins])
        vals = np.array(list(pins.values()))
        pool = self.pool(i2)
        exact, ambiguous = [], False
        if pool:
            P = np.array([r.point for r in pool])
            dist = np.max(np.abs(P[:, cols] - vals), axis=1)
            exact = [pool[k] for k in np.nonzero(dist <= COINCIDE * zt)[0]]
            ambiguous = bool(np.any((dist > COINCIDE * zt) & (dist <= AMBIGUOUS * zt)))
        refined = dst.analysis.pinned_boundary(pins)
        if exact and refined:
            # slow pinned Newton near a double root lands beside the exact point
            E = np.array([r.point for r in exact])
            d, _ = cKDTree(E).query(np.array([r.point for r in refined]))
            refined = [r for r, dk in zip(refined, d) if dk > 10 * np.sqrt(zt)]
        recs = exact + refined
        if recs:
            P = np.array([r.point for r in recs])
            recs = [recs[k] for k in _dedupe(P, COINCIDE * zt)]
        out = Fiber(sorted(recs, key=BoundaryPointRecord.sort_key), ambiguous)
        self._fibers[key] = out
        return out

    def _require_npoints(self, res: ConditionResult, ws: list, i: int, p: BoundaryPointRecord,
                         i2: int, coords: VarSet, why: str) -> None:
        """Every fiber point over ``p`` in block ``i2`` must be a {c}-N-point for c in ``coords``."""
        fib = self.fiber(i, p.point, i2)
        if fib is None:
            return
        dst = self.blocks[i2]
        verdicts = []
        if fib.ambiguous:
            verdicts.append(INDETERMINATE)
            ws.append(self._witness(res.name, i, p, i2, None, "fiber value within the ambiguity band"))
        for q in fib.records:
            for c in coords:
                v = _npoint_status(q, (dst.local(c),), self.tol)
                verdicts.append(v)
                if v != PASS:
                    kind = "non-normal point" if not q.is_normal else f"x{c}-critical point"
                    ws.append(self._witness(res.name, i, p, i2, q,
                                            f"{why}; fiber contains a {kind}" if v == FAIL
                                            else f"{why}; rank decision ambiguous in fiber"))
        res.verdict = combine([res.verdict] + verdicts)

    def _witness(self, cond, i, p, i2, q, diag) -> Witness:
        pts = [p.point.tolist()] + ([q.point.tolist()] if q is not None else [])
        data = {"blocks": [self.label(i)] + ([self.label(i2)] if i2 is not None else [])}
        return Witness(cond, pts, diag, data)

    # -- conditions -----------------------------------------------------------
    def cond6(self) -> ConditionResult:
        res = ConditionResult("cond-6", PASS)
        if not self.ready:
            return _skipped(res, self)
        fam = self.inp.blocks
        ws: list[Witness] = []
        for i, blk in enumerate(self.blocks):
            for c in fam.shared_coords(i):
                crit = blk.analysis.critical(blk.localset((c,)))
                if crit.degenerate:
                    res.notes.append(f"block {list(blk.coords)}: x{c} projection degenerate")
                    continue
                for p in _subsample(crit.records, MAX_FIBER_SOURCES):
                    for i2 in range(len(fam)):
                        if i2 == i:
                            continue
                        if c in fam.blocks[i2]:
                            self._require_npoints(res, ws, i, p, i2, (c,), f"x{c}-critical point")
                        else:
                            self._require_npoints(res, ws, i, p, i2, fam.shared(i, i2), f"x{c}-critical point")
        res.witnesses = _cap(ws, res.notes)
        return res

    def cond7(self) -> ConditionResult:
        res = ConditionResult("cond-7", PASS)
        if not self.ready:
            return _skipped(res, self)
        fam = self.inp.blocks
        ws: list[Witness] = []
        for i, blk in enumerate(self.blocks):
            for p in _subsample(blk.nonnormal, MAX_NONNORMAL_SOURCES):
                for i2 in range(len(fam)):
                    if i2 != i:
                        self._require_npoints(res, ws, i, p, i2, fam.shared(i, i2), "non-normal point")
        res.witnesses = _cap(ws, res.notes)
        return res

    def special_values(self, i: int, c: int) -> list[tuple[float, BoundaryPointRecord]]:
        blk = self.blocks[i]
        k = blk.local(c) - 1
        recs = list(blk.analysis.critical(blk.localset((c,))).records) + blk.nonnormal
        return sorted(((float(r.point[k]), r) for r in recs), key=lambda t: t[0])

    def thm2(self) -> ConditionResult:
        res = ConditionResult("thm2", PASS)
        fam = self.inp.blocks
        if any(s > 2 for s in fam.sizes):
            res.verdict = SKIPPED
            res.notes.append("not applicable: a block has three or more coordinates")
            return res
        if not self.ready:
            return _skipped(res, self)
        zt = self.tol.zero_tol
        ws: list[Witness] = []
        verdicts = []
        for i, i2 in itertools.combinations(range(len(fam)), 2):
            for c in fam.shared(i, i2):
                s1, s2 = self.special_values(i, c), self.special_values(i2, c)
                for (v1, r1), (v2, r2) in itertools.product(s1, s2):
                    d = abs(v1 - v2)
                    if d <= COINCIDE * zt:
                        verdicts.append(FAIL)
                        w = self._witness("thm2", i, r1, i2, r2, f"special x{c}-values coincide at {v1:.9g}")
                        w.data["value"] = v1
                        ws.append(w)
                    elif d <= AMBIGUOUS * zt:
                        verdicts.append(INDETERMINATE)
                        ws.append(self._witness("thm2", i, r1, i2, r2, f"special x{c}-values {d:.3g} apart"))
        res.verdict = combine([PASS] + verdicts)
        res.witnesses = _cap(ws, res.notes)
        return res

    def _singular_normal(self, i: int, N: VarSet) -> list[BoundaryPointRecord]:
        blk = self.blocks[i]
        crit = blk.analysis.critical(blk.localset(N))
        return [r for r in crit.records if r.is_normal]

    def cond8(self) -> ConditionResult:
        res = ConditionResult("cond-8", PASS)
        if not self.ready:
            return _skipped(res, self)
        fam = self.inp.blocks
        ws: list[Witness] = []
        for i, blk in enumerate(self.blocks):
            for N in _shared_subsets(fam, i, self.b):
                if len(N) + 1 > len(blk.coords):
                    continue
                for p in _subsample(self._singular_normal(i, N), MAX_FIBER_SOURCES):
                    for i2 in range(len(fam)):
                        if i2 == i:
                            continue
                        if set(N) <= set(fam.blocks[i2]):
                            fib = self.fiber(i, p.point, i2)
                            if fib.ambiguous:
                                res.verdict = combine([res.verdict, INDETERMINATE])
                                ws.append(self._witness("cond-8", i, p, i2, None, "fiber value within the ambiguity band"))
                            for q in fib.records:
                                if not q.is_normal:
                                    res.verdict = FAIL
                                    ws.append(self._witness("cond-8", i, p, i2, q,
                                                            f"fiber over an {_nstr(N)}-singular point is not normal"))
                        else:
                            self._require_npoints(res, ws, i, p, i2, fam.shared(i, i2),
                                                  f"{_nstr(N)}-singular point")
        res.witnesses = _cap(ws, res.notes)
        return res

    def cond9(self) -> ConditionResult:
        res = ConditionResult("cond-9", PASS)
        if not self.ready:
            return _skipped(res, self)
        fam = self.inp.blocks
        ws: list[Witness] = []
        margins: list[float] = []
        Ns = sorted({N for i in range(len(fam)) for N in _shared_subsets(fam, i, self.b)})
        for N in Ns:
            members = [i for i in range(len(fam)) if set(N) <= set(fam.blocks[i])]
            if len(members) < 2:
                continue
            found: list[tuple[int, np.ndarray]] = []
            ambiguous = False
            for i, i2 in itertools.combinations(members, 2):
                pairs, amb = self._coincidences(N, i, i2)
                ambiguous |= amb
                for q1, q2 in pairs:
                    found.append((i, q1))
                    found.append((i2, q2))
            if ambiguous:
                res.verdict = combine([res.verdict, INDETERMINATE])
                ws.append(Witness("cond-9", [], f"{_nstr(N)}-projections nearly coincide", {"N": list(N)}))
            for family in _families(found, [[b.local(c) for c in N] for b in self.blocks], self.tol.zero_tol):
                frames, Nl, pts = [], [], []
                for i, q in family:
                    blk = self.blocks[i]
                    a = tuple(np.nonzero(np.abs(blk.analysis.values(q[None])[0]) <= 10 * self.tol.zero_tol)[0].tolist())
                    frames.append(blk.analysis.frame(q, a))
                    Nl.append(blk.localset(N))
                    pts.append(q.tolist())
                info = geo.projected_rank(frames, Nl, self.tol)
                margins.append(info.min_ratio)
                data = {"N": list(N), "blocks": [self.label(i) for i, _ in family],
                        "rank": info.rank, "min_ratio": info.min_ratio}
                if info.indeterminate:
                    res.verdict = combine([res.verdict, INDETERMINATE])
                    ws.append(Witness("cond-9", pts, "projected normals: rank decision ambiguous", data))
                elif info.rank < len(frames):
                    res.verdict = FAIL
                    ws.append(Witness("cond-9", pts, f"projected normals dependent (rank {info.rank})", data))
        if margins:
            res.notes.append(f"{len(margins)} coincident families, smallest singular-value ratio {min(margins):.6g}")
        res.witnesses = _cap(ws, res.notes)
        return res

    def _coincidences(self, N: VarSet, i: int, i2: int) -> tuple[list[tuple[np.ndarray, np.ndarray]], bool]:
        """Pairs of N-singular normal points of blocks i and i2 (local coordinates) with equal N-projection."""
        zt = self.tol.zero_tol
        b1, b2 = self.blocks[i], self.blocks[i2]
        P = self._singular_normal(i, N)
        Q = self._singular_normal(i2, N)
        if not P or not Q:
            return [], False
        PN = np.array([[r.point[b1.local(c) - 1] for c in N] for r in P])
        QN = np.array([[r.point[b2.local(c) - 1] for c in N] for r in Q])
        union = varset(set(b1.coords) | set(b2.coords))
        neq = sum(len(b.coords) - len(N) + 1 for b in (b1, b2))
        out: list[tuple[np.ndarray, np.ndarray]] = []
        if neq > len(union):
            # isolated singular points: compare them directly
            tree = cKDTree(QN)
            amb = False
            for a, hits in enumerate(tree.query_ball_point(PN, AMBIGUOUS * zt, p=np.inf)):
                for h in hits:
                    d = np.max(np.abs(PN[a] - QN[h]))
                    if d <= COINCIDE * zt:
                        out.append((P[a].point, Q[h].point))
                    else:
                        amb = True
            return out, amb
        # singular sets of positive dimension: solve for the crossing jointly
        spacing = max(float(np.max(b1.analysis.spacing)), float(np.max(b2.analysis.spacing)))
        pairs = cKDTree(PN).query_ball_tree(cKDTree(QN), 3 * spacing)
        starts = []
        for a, hits in enumerate(pairs):
            for h in hits:
                z = np.zeros(self.inp.n)
                for c, v in b2.ambient(Q[h].point).items():
                    z[c - 1] = v
                for c, v in b1.ambient(P[a].point).items():
                    z[c - 1] = v
                for k, c in enumerate(N):
                    z[c - 1] = 0.5 * (PN[a, k] + QN[h, k])
                starts.append(z)
        if not starts:
            return [], False
        Z0 = np.array(starts)
        Z0 = Z0[_cell_subsample(Z0, np.zeros(len(Z0)), np.full(self.inp.n, spacing), 400)]
        polys = []
        for blk in (b1, b2):
            polys.extend(self._singular_system(blk, N))
        pinned = tuple(c for c in range(1, self.inp.n + 1) if c not in union)
        Z, st = geo.refine_batch(Z0, polys, self.tol, pinned=pinned)
        Z = Z[st == 0]
        keep = []
        for k, z in enumerate(Z):
            good = True
            for blk in (b1, b2):
                q = np.array([z[c - 1] for c in blk.coords])[None]
                an = blk.analysis
                good &= bool(an.in_closure(q)[0] and an.in_box(q)[0] and an.near_component(q)[0])
            if good:
                keep.append(k)
        Z = Z[keep]
        Z = Z[_dedupe(Z, COINCIDE * zt)] if len(Z) else Z
        Z = Z[np.lexsort(Z.T[::-1])] if len(Z) else Z
        out = [(Z[k, [c - 1 for c in b1.coords]], Z[k, [c - 1 for c in b2.coords]]) for k in range(len(Z))]
        return out, False

    def _singular_system(self, blk: Block, N: VarSet) -> list:
        """Equations of the N-singular normal locus of a single-surface block, in ambient variables."""
        js = self.inp.block_surfaces(blk.index)
        out = []
        for j in js:
            f = self.inp.surfaces[j].f
            out.append(f)
            out.extend(f.derivative(c) for c in blk.coords if c not in N)
        if len(js) != 1:
            raise NotImplementedError("joint singular-set solve needs exactly one surface per block")
        return out


def _families(found: list[tuple[int, np.ndarray]], Nloc: list[list[int]], zt: float) -> list:
    """Group coincident points by their N-projection; one family per choice of point per block."""
    if not found:
        return []
    P = np.array([[q[k - 1] for k in Nloc[i]] for i, q in found])
    groups: dict[int, list] = {}
    tree = cKDTree(P)
    for k in range(len(found)):
        root = min(tree.query_ball_point(P[k], COINCIDE * zt, p=np.inf))
        groups.setdefault(root, []).append(found[k])
    families = []
    for root in sorted(groups):
        byblock: dict[int, list[np.ndarray]] = {}
        for i, q in groups[root]:
            lst = byblock.setdefault(i, [])
            if not any(np.max(np.abs(q - w)) <= COINCIDE * zt for w in lst):
                lst.append(q)
        if len(byblock) < 2:
            continue
        keys = sorted(byblock)
        for combo in itertools.product(*(byblock[i] for i in keys)):
            families.append(list(zip(keys, combo)))
    return families


def _shared_subsets(fam: BlockFamily, i: int, b: int) -> list[VarSet]:
    """Sets N with 1 <= |N| <= b contained in block i and in at least one other block."""
    out = set()
    for i2 in range(len(fam)):
        if i2 == i:
            continue
        sh = fam.shared(i, i2)
        for k in range(1, min(b, len(sh)) + 1):
            out.update(itertools.combinations(sh, k))
    return sorted(out)


def _nstr(N) -> str:
    return "{" + ",".join(f"x{c}" for c in N) + "}"


def _cap(ws: list[Witness], notes: list[str]) -> list[Witness]:
    # definite failures first, then ambiguous ones
    ws = sorted(ws, key=lambda w: ("ambiguous" in w.diagnostic, Witness.sort_key(w)))
    if len(ws) > MAX_WITNESSES:
        notes.append(f"{len(ws)} witnesses, first {MAX_WITNESSES} shown")
        ws = ws[:MAX_WITNESSES]
    return ws


def _skipped(res: ConditionResult, chk: Checker) -> ConditionResult:
    res.verdict = SKIPPED
    errs = [f"block {list(b.coords)}: {b.error}" for b in chk.blocks if b.error]
    res.notes.append("precondition failed; " + "; ".join(errs) if errs else "precondition failed")
    return res


def _safe_analyze(spec):
    try:
        return analyze(spec)
    except RegionError:
        return None


@lru_cache(maxsize=8)
def checker(inp: DecompositionInput, b: int = 1) -> Checker:
    return Checker(inp, b)


def check_prar(inp: DecompositionInput) -> list[ConditionResult]:
    """The four block-level conditions: realization, support, full support, block regions."""
    fam = inp.blocks
    out = []
    r1 = ConditionResult("prar-1", PASS)
    for i, A in enumerate(fam.blocks):
        if not inp.block_surfaces(i):
            r1.verdict = FAIL
            r1.witnesses.append(Witness("prar-1", [], f"block {list(A)} has no surface", {"block": list(A)}))
    out.append(r1)
    r2 = ConditionResult("prar-2", PASS)
    for j, s in enumerate(inp.surfaces):
        A = fam.blocks[inp.assignment[j]]
        if not set(s.support) <= set(A):
            r2.verdict = FAIL
            r2.witnesses.append(Witness("prar-2", [], f"support of {s.label} is not inside its block",
                                        {"surface": s.label, "support": list(s.support), "block": list(A)}))
    out.append(r2)
    r3 = ConditionResult("prar-3", PASS)
    for i, A in enumerate(fam.blocks):
        if not any(inp.surfaces[j].support == A for j in inp.block_surfaces(i)):
            r3.verdict = FAIL
            r3.witnesses.append(Witness("prar-3", [], f"no surface of block {list(A)} depends on all its variables",
                                        {"block": list(A)}))
    out.append(r3)
    r4 = ConditionResult("prar-4", PASS)
    if r1.verdict == FAIL or r2.verdict == FAIL:
        r4.verdict = SKIPPED
        r4.notes.append("block regions undefined")
    else:
        chk = checker(inp, 1)
        for blk in chk.blocks:
            if blk.error:
                r4.verdict = FAIL
                r4.witnesses.append(Witness("prar-4", [], f"block {list(blk.coords)}: {blk.error}",
                                            {"block": list(blk.coords)}))
                continue
            rep = check_definition1(blk.spec)
            for c in rep.conditions:
                r4.verdict = combine([r4.verdict, c.verdict])
                for w in c.witnesses:
                    r4.witnesses.append(Witness("prar-4", w.points, f"{c.name}: {w.diagnostic}",
                                                {**w.data, "block": list(blk.coords)}))
            r4.notes.extend(f"block {list(blk.coords)}: {cav}" for cav in rep.caveats)
        r4.witnesses = _cap(r4.witnesses, r4.notes)
    out.append(r4)
    return out


def check_b_intersection(inp: DecompositionInput, b: int) -> ConditionResult:
    fam = inp.blocks
    if not 1 <= b <= max(fam.n - 1, 1):
        raise DecompositionError(f"b={b} must lie in 1..{fam.n - 1}")
    res = ConditionResult("b-intersection", PASS, notes=[f"b={b}"])
    for i, i2 in itertools.combinations(range(len(fam)), 2):
        sh = fam.shared(i, i2)
        if len(sh) > b:
            res.verdict = FAIL
            res.witnesses.append(Witness("b-intersection", [], f"blocks share {len(sh)} > {b} coordinates",
                                         {"blocks": [list(fam.blocks[i]), list(fam.blocks[i2])], "shared": list(sh)}))
    res.witnesses = _cap(res.witnesses, res.notes)
    return res


def check_cond6(inp: DecompositionInput) -> ConditionResult:
    return checker(inp, 1).cond6()


def check_cond7(inp: DecompositionInput) -> ConditionResult:
    return checker(inp, 1).cond7()


def check_thm2(inp: DecompositionInput) -> ConditionResult:
    """Disjointness of special values; the cond-6/cond-7 agreement is recorded in the notes."""
    chk = checker(inp, 1)
    res = chk.thm2()
    if res.verdict != SKIPPED:
        both = combine([chk.cond6().verdict, chk.cond7().verdict])
        if INDETERMINATE not in (both, res.verdict):
            agree = both == res.verdict
            res.notes.append("agrees with cond-6 and cond-7" if agree
                             else f"internal inconsistency: cond-6 and cond-7 give {both}")
    return res


def check_thm3(inp: DecompositionInput, b: int) -> list[ConditionResult]:
    chk = checker(inp, b)
    return [chk.cond8(), chk.cond9()]


def assemble(inp: DecompositionInput, mode: str = "thm1", b: int | None = None) -> ConditionReport:
    """Run the hypothesis chain for ``mode`` plus the direct check on the ambient region."""
    if mode not in ("thm1", "thm3"):
        raise DecompositionError(f"unknown mode {mode!r}")
    if b is None:
        b = 1
    if mode == "thm1" and b != 1:
        raise DecompositionError("the thm1 chain uses b=1")
    report = ConditionReport(meta={"mode": mode, "b": b, "n": inp.n,
                                   "blocks": [list(A) for A in inp.blocks.blocks],
                                   "surfaces": [s.label for s in inp.surfaces]})
    for r in check_prar(inp):
        report.add(r)
    report.add(check_b_intersection(inp, b))
    chk = checker(inp, b)
    if mode == "thm1":
        report.add(chk.cond6())
        report.add(chk.cond7())
        if all(s <= 2 for s in inp.blocks.sizes):
            report.add(check_thm2(inp))
    else:
        report.add(chk.cond7())
        for r in check_thm3(inp, b):
            report.add(r)
    try:
        direct = check_definition1(inp.region_spec())
    except RegionError as exc:
        raise DecompositionError(str(exc)) from exc
    for c in direct.conditions:
        c.name = "direct-" + c.name
        for w in c.witnesses:
            w.condition = c.name
        report.add(c)
    report.caveats.extend(direct.caveats)
    return report
