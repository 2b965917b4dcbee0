"""Region model, the two region conditions and boundary-point classification.

A region is the connected component, containing a seed point, of
``{f_1 > 0, ..., f_l > 0}`` inside a box.  Its boundary is sampled on a
grid, projected onto the zero sets by Newton refinement and then inspected
through normal frames.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import geometry as geo
from .geometry import Box, NormalFrame, Tolerances
from .poly import Polynomial, VarSet, evaluate_exact, support, varset
from .report import (FAIL, INDETERMINATE, PASS, ConditionReport, ConditionResult,
                     Witness, combine)

log = logging.getLogger(__name__)

CRITICAL = "critical"
NPOINT = "N-point"
NOT_APPLICABLE = "not-applicable"

MAX_WITNESSES = 20
# seeds handed to the critical/degeneracy solvers, per stratum
MAX_SOLVER_SEEDS = 400
BOX_CAVEAT = "verified within box only"


class RegionError(ValueError):
    """Malformed region input (seed outside the region, dimension mismatch)."""


class EmptySampleError(RegionError):
    """The region is thinner than the grid near the seed."""


@dataclass(frozen=True)
class CylinderSurface:
    label: str
    f: Polynomial
    support_override: VarSet | None = None

    def __post_init__(self):
        if self.support_override is not None:
            object.__setattr__(self, "support_override", varset(self.support_override))

    @property
    def support(self) -> VarSet:
        if self.support_override is not None:
            return self.support_override
        return support(self.f)

    @property
    def overridden(self) -> bool:
        return self.support_override is not None

    def is_cylinder(self, n: int) -> bool:
        return len(self.support) < n

    def scaled(self, c) -> "CylinderSurface":
        return CylinderSurface(self.label, self.f * c, self.support_override)


@dataclass(frozen=True)
class RegionSpec:
    nvars: int
    surfaces: tuple[CylinderSurface, ...]
    seed: tuple[float, ...]
    box: Box
    tol: Tolerances = Tolerances()

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        object.__setattr__(self, "seed", tuple(float(v) for v in self.seed))
        if not self.surfaces:
            raise RegionError("a region needs at least one surface")
        for s in self.surfaces:
            if s.f.nvars != self.nvars:
                raise RegionError(f"surface {s.label} has {s.f.nvars} variables, expected {self.nvars}")
        if len(self.seed) != self.nvars or self.box.dim != self.nvars:
            raise RegionError("seed and box must match the ambient dimension")
        if not self.box.contains(self.seed):
            raise RegionError("seed lies outside the box")

    @property
    def polys(self) -> tuple[Polynomial, ...]:
        return tuple(s.f for s in self.surfaces)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.surfaces)

    def check_seed(self) -> None:
        for s in self.surfaces:
            if evaluate_exact(s.f, self.seed) <= 0:
                raise RegionError(f"seed does not satisfy {s.label} > 0")

    def with_surfaces(self, surfaces) -> "RegionSpec":
        return RegionSpec(self.nvars, tuple(surfaces), self.seed, self.box, self.tol)


@dataclass
class BoundaryPointRecord:
    point: np.ndarray
    active: tuple[int, ...]
    frame: NormalFrame
    flags: dict[VarSet, str] = field(default_factory=dict)
    source: str = "sample"

    @property
    def is_normal(self) -> bool:
        return len(self.active) == 1

    def classify(self, Ns: Iterable[VarSet], tol: Tolerances) -> "BoundaryPointRecord":
        for N in Ns:
            N = varset(N)
            if geo.subspace_meets(self.frame, N, tol):
                self.flags[N] = CRITICAL
            elif self.is_normal:
                self.flags[N] = NPOINT
            else:
                self.flags[N] = NOT_APPLICABLE
        return self

    def is_npoint(self, N: VarSet, tol: Tolerances) -> bool:
        N = varset(N)
        if N not in self.flags:
            self.classify([N], tol)
        return self.flags[N] == NPOINT

    def sort_key(self):
        return tuple(np.round(self.point, 12)) + (self.active,)


@dataclass
class CriticalSearch:
    """Critical points of a coordinate projection on the boundary strata."""

    N: VarSet
    records: list[BoundaryPointRecord]
    degenerate: bool = False
    note: str = ""

    @property
    def points(self) -> list[np.ndarray]:
        return [r.point for r in self.records]

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.points)


def _dedupe(Q: np.ndarray, radius: float) -> np.ndarray:
    """Indices of a greedy representative per cluster of points within ``radius``."""
    if len(Q) == 0:
        return np.zeros(0, dtype=int)
    pairs = cKDTree(Q).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return np.arange(len(Q))
    parent = np.arange(len(Q))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(Q))])
    return np.unique(roots)


def _cell_subsample(Q: np.ndarray, score: np.ndarray, cell: np.ndarray, cap: int) -> np.ndarray:
    """One index per grid cell (best score), at most ``cap`` overall, deterministic."""
    if len(Q) == 0:
        return np.zeros(0, dtype=int)
    keys = np.floor(Q / cell).astype(np.int64)
    order = np.lexsort((score,) + tuple(keys.T[::-1]))
    _, first = np.unique(keys[order], axis=0, return_index=True)
    chosen = order[first]
    chosen = chosen[np.argsort(score[chosen], kind="stable")][:cap]
    return np.sort(chosen)


class RegionAnalysis:
    """Grid sample, refined boundary points and derived data for one region."""

    def __init__(self, spec: RegionSpec):
        spec.check_seed()
        self.spec = spec
        self.tol = spec.tol
        self.n = spec.nvars
        self.polys = spec.polys
        grid = geo.sample_grid([(f, 1) for f in self.polys], spec.box, self.tol)
        self.res = grid.res
        self.axes = grid.axes
        self.spacing = grid.spacing
        self.members = grid.members
        self._grid = grid
        self.dmask = self._seed_component(grid)
        self.touches_box = self._touches_box()
        self.caveats: list[str] = [BOX_CAVEAT] if self.touches_box else []
        self.other_nearby = self._other_components_nearby(grid)
        self._sample_boundary(grid)
        self._grid = None  # drop the value arrays

    # -- grid ------------------------------------------------------------
    def _seed_component(self, grid: geo.GridSample) -> np.ndarray:
        seed = np.array(self.spec.seed)
        lo = np.array(self.spec.box.lo)
        base = np.floor((seed - lo) / self.spacing).astype(int)
        best, best_d = None, np.inf
        for off in itertools.product((0, 1), repeat=self.n):
            k = np.clip(base + np.array(off), 0, self.res - 1)
            if grid.members[tuple(k)]:
                d = np.linalg.norm(grid.coords(k[None])[0] - seed)
                if d < best_d:
                    best, best_d = k, d
        if best is None:
            raise EmptySampleError("no grid sample of the region next to the seed; increase grid_res")
        return grid.labels == grid.labels[tuple(best)]

    def _touches_box(self) -> bool:
        for ax in range(self.n):
            first = np.take(self.dmask, 0, axis=ax)
            last = np.take(self.dmask, self.res - 1, axis=ax)
            if first.any() or last.any():
                return True
        return False

    def _other_components_nearby(self, grid) -> np.ndarray:
        shell = ndimage.binary_dilation(self.dmask, iterations=2)
        other = grid.members & ~self.dmask & shell
        return grid.coords(np.argwhere(other))

    def coords(self, idx):
        return np.stack([self.axes[i][idx[:, i]] for i in range(self.n)], axis=-1)

    def values(self, X: np.ndarray) -> np.ndarray:
        return geo.eval_values(self.polys, X)

    def in_closure(self, X: np.ndarray) -> np.ndarray:
        return np.all(self.values(X) >= -self.tol.zero_tol, axis=1)

    def in_box(self, X: np.ndarray) -> np.ndarray:
        """Strictly inside the box, away from the faces by half a grid cell."""
        lo = np.array(self.spec.box.lo) + 0.5 * self.spacing
        hi = np.array(self.spec.box.hi) - 0.5 * self.spacing
        return np.all((X >= lo) & (X <= hi), axis=1)

    def near_component(self, X: np.ndarray, radius: int = 2) -> np.ndarray:
        X = np.atleast_2d(X)
        if len(X) == 0:
            return np.zeros(0, dtype=bool)
        lo = np.array(self.spec.box.lo)
        base = np.rint((X - lo) / self.spacing).astype(int)
        hit = np.zeros(len(X), dtype=bool)
        for off in itertools.product(range(-radius, radius + 1), repeat=self.n):
            k = np.clip(base + np.array(off), 0, self.res - 1)
            hit |= self.dmask[tuple(k.T)]
        return hit

    # -- boundary sampling -----------------------------------------------
    def _sample_boundary(self, grid) -> None:
        tol, n, k = self.tol, self.n, len(self.polys)
        D = self.dmask
        starts: list[np.ndarray] = []
        surf: list[np.ndarray] = []
        seed_ids: list[np.ndarray] = []
        for ax in range(n):
            for shift in (1, -1):
                src = [slice(None)] * n
                dst = [slice(None)] * n
                if shift == 1:
                    src[ax], dst[ax] = slice(0, -1), slice(1, None)
                else:
                    src[ax], dst[ax] = slice(1, None), slice(0, -1)
                src, dst = tuple(src), tuple(dst)
                for j in range(k):
                    Fj = grid.values[j]
                    mask = D[src] & (Fj[dst] <= 0)
                    idx = np.argwhere(mask)
                    if idx.size == 0:
                        continue
                    if shift == -1:
                        idx[:, ax] += 1
                    nb = idx.copy()
                    nb[:, ax] += shift
                    a = Fj[tuple(idx.T)]
                    b = Fj[tuple(nb.T)]
                    t = a / (a - b)
                    x = self.coords(idx)
                    y = self.coords(nb)
                    starts.append(x + t[:, None] * (y - x))
                    surf.append(np.full(len(idx), j))
                    seed_ids.append(np.ravel_multi_index(tuple(idx.T), D.shape))
        self.boundary_seed_count = 0
        self.unexplained: np.ndarray = np.zeros((0, n))
        if not starts:
            self.Q = np.zeros((0, n))
            self.active: list[tuple[int, ...]] = []
            return
        P0 = np.concatenate(starts)
        J = np.concatenate(surf)
        S = np.concatenate(seed_ids)
        # one start per (seed, surface)
        _, keep = np.unique(S * k + J, return_index=True)
        keep = np.sort(keep)
        P0, J, S = P0[keep], J[keep], S[keep]
        self.boundary_seed_count = len(np.unique(S))

        Q = np.empty_like(P0)
        good = np.zeros(len(P0), dtype=bool)
        for j in range(k):
            sel = np.nonzero(J == j)[0]
            if sel.size == 0:
                continue
            Qj, st = geo.refine_batch(P0[sel], [self.polys[j]], tol)
            Q[sel] = Qj
            good[sel] = st == 0

        band = tol.activation_band
        F = np.full((len(P0), k), np.nan)
        F[good] = self.values(Q[good])
        extra = good[:, None] & (F <= band)
        extra[np.arange(len(J)), J] = False
        need_joint = extra.any(axis=1)

        final = Q.copy()
        ok = good & ~need_joint
        groups: dict[tuple[int, ...], list[int]] = {}
        for i in np.nonzero(need_joint)[0]:
            key = tuple(sorted({int(J[i])} | set(np.nonzero(extra[i])[0].tolist())))
            groups.setdefault(key, []).append(i)
        for key, rows in sorted(groups.items()):
            rows = np.array(rows)
            if len(key) <= n:
                Qg, st = geo.refine_batch(Q[rows], [self.polys[a] for a in key], tol)
                conv = st == 0
                final[rows[conv]] = Qg[conv]
                ok[rows[conv]] = True
                # rank deficient or divergent joint solve: keep single-surface point
                ok[rows[~conv]] = True
            else:
                ok[rows] = True

        seed_coords = self.coords(np.stack(np.unravel_index(S, D.shape), axis=1))
        near = np.linalg.norm(final - seed_coords, axis=1) <= 3.0 * float(np.max(self.spacing))
        ok &= near
        idx_ok = np.nonzero(ok)[0]
        closure = self.in_closure(final[idx_ok])
        inside = self.in_box(final[idx_ok])
        accepted = idx_ok[closure & inside]
        if np.any(closure & ~inside):
            self.caveats.append(BOX_CAVEAT)

        explained = np.zeros(D.size, dtype=bool)
        explained[S[idx_ok[closure]]] = True
        unexplained_ids = np.setdiff1d(np.unique(S), np.nonzero(explained)[0])
        self.unexplained = self.coords(np.stack(np.unravel_index(unexplained_ids, D.shape), axis=1)) \
            if unexplained_ids.size else np.zeros((0, n))

        Qa = final[accepted]
        reps = _dedupe(Qa, 10 * tol.zero_tol)
        Qa = Qa[reps]
        Fa = self.values(Qa)
        self.Q = Qa
        self.active = [tuple(np.nonzero(np.abs(row) <= tol.zero_tol)[0].tolist()) for row in Fa]
        # a refined point is on at least the surface it was projected to
        src_surface = J[accepted][reps]
        self.active = [a if a else (int(s),) for a, s in zip(self.active, src_surface)]
        for _ in range(n - 1):
            if not self._add_strata():
                break

    def _add_strata(self) -> bool:
        """Jointly refine sampled points lying within two cells of a further surface.

        Corners are rarely hit by single-surface refinement, so each active set
        is extended by every nearby surface and solved again.  Returns whether
        new points were added.
        """
        tol, k = self.tol, len(self.polys)
        if len(self.Q) == 0 or k < 2:
            return False
        reach = 2.0 * float(np.max(self.spacing))
        F = np.abs(self.values(self.Q))
        G = np.linalg.norm(geo.eval_jacobian(self.polys, self.Q), axis=2)
        dist = F / np.maximum(G, 1e-300)
        starts: dict[tuple[int, ...], list[int]] = {}
        for r, a in enumerate(self.active):
            if len(a) + 1 > self.n:
                continue
            for j in range(k):
                if j not in a and dist[r, j] <= reach:
                    starts.setdefault(tuple(sorted(a + (j,))), []).append(r)
        new_pts = []
        for key, rows in sorted(starts.items()):
            rows = np.array(rows)
            rows = rows[_cell_subsample(self.Q[rows], dist[rows][:, list(key)].max(axis=1), self.spacing,
                                        MAX_SOLVER_SEEDS)]
            Z, st = geo.refine_batch(self.Q[rows], [self.polys[a] for a in key], tol)
            Z = Z[st == 0]
            if len(Z) == 0:
                continue
            ok = (np.linalg.norm(Z - self.Q[rows][st == 0], axis=1) <= 3 * reach) & self.in_closure(Z) \
                & self.in_box(Z) & self.near_component(Z)
            new_pts.append(Z[ok])
        if not new_pts:
            return False
        Z = np.concatenate(new_pts)
        if len(Z) == 0:
            return False
        d, _ = cKDTree(self.Q).query(Z)
        Z = Z[d > 10 * tol.zero_tol]
        if len(Z) == 0:
            return False
        Z = Z[_dedupe(Z, 10 * tol.zero_tol)]
        Fz = self.values(Z)
        act = [tuple(np.nonzero(np.abs(row) <= tol.zero_tol)[0].tolist()) for row in Fz]
        self.Q = np.concatenate([self.Q, Z])
        self.active = self.active + act
        order = np.lexsort(self.Q.T[::-1])
        self.Q = self.Q[order]
        self.active = [self.active[i] for i in order]
        return True

    # -- frames ------------------------------------------------------------
    def frame(self, q, active: Sequence[int]) -> NormalFrame:
        return geo.normal_frame(q, [self.polys[a] for a in active], self.tol, active)

    def frames(self, X, active: Sequence[int]) -> list[NormalFrame]:
        return geo.normal_frames(X, [self.polys[a] for a in active], self.tol, active)

    @cached_property
    def active_groups(self) -> dict[tuple[int, ...], np.ndarray]:
        groups: dict[tuple[int, ...], list[int]] = {}
        for i, a in enumerate(self.active):
            groups.setdefault(a, []).append(i)
        return {a: np.array(v) for a, v in sorted(groups.items())}

    @cached_property
    def sample_ranks(self) -> list[tuple[int, float, bool]]:
        """(numerical rank, smallest singular-value ratio, indeterminate) per sampled point."""
        out: list = [None] * len(self.Q)
        band = np.sqrt(self.tol.indeterminate_factor)
        lo, hi = self.tol.rank_rel_tol / band, self.tol.rank_rel_tol * band
        for a, rows in self.active_groups.items():
            G = geo.eval_jacobian([self.polys[i] for i in a], self.Q[rows])
            s = np.linalg.svd(G, compute_uv=False)
            smax = s[:, 0]
            safe = np.where(smax > 1e-300, smax, 1.0)
            ratios = np.where(smax[:, None] > 1e-300, s / safe[:, None], 0.0)
            ranks = np.sum(ratios >= self.tol.rank_rel_tol, axis=1)
            indet = np.any((ratios >= lo) & (ratios < hi), axis=1)
            for r, rk, mr, ind in zip(rows, ranks, ratios.min(axis=1), indet):
                out[r] = (int(rk), float(mr), bool(ind))
        return out

    @cached_property
    def sample_records(self) -> list[BoundaryPointRecord]:
        recs: list = [None] * len(self.Q)
        for a, rows in self.active_groups.items():
            for r, fr in zip(rows, self.frames(self.Q[rows], a)):
                recs[r] = BoundaryPointRecord(self.Q[r].copy(), a, fr)
        return recs

    def _validate_solutions(self, X, ok, stratum) -> np.ndarray:
        """Indices of solver outputs that are boundary points of this region on ``stratum``."""
        idx = np.nonzero(ok)[0]
        if idx.size == 0:
            return idx
        X = X[idx]
        F = self.values(X)
        on = np.abs(F) <= 10 * self.tol.zero_tol
        want = np.zeros(len(self.polys), dtype=bool)
        want[list(stratum)] = True
        exact = np.all(on == want, axis=1)
        keep = exact & np.all(F >= -self.tol.zero_tol, axis=1) & self.in_box(X) & self.near_component(X)
        return idx[keep]

    # -- degeneracies (dependent normals) ---------------------------------
    @cached_property
    def degeneracies(self) -> list[BoundaryPointRecord]:
        tol = self.tol
        out: list[BoundaryPointRecord] = []
        ranks = self.sample_ranks
        cell = self.spacing
        for a, rows in self.active_groups.items():
            polys = [self.polys[i] for i in a]
            # points already rank deficient at sampling time
            for r in rows:
                rk, _, _ = ranks[r]
                if rk < len(a):
                    out.append(BoundaryPointRecord(self.Q[r].copy(), a, self.frame(self.Q[r], a), source="degenerate"))
            if len(a) > 1:
                score = np.array([ranks[r][1] for r in rows])
                sus = score < 0.25
            else:
                g = np.linalg.norm(geo.eval_jacobian(polys, self.Q[rows])[:, 0, :], axis=1)
                med = np.median(g) if g.size else 0.0
                score = g / med if med > 0 else np.zeros_like(g)
                sus = score < 0.05
            cand = rows[sus]
            if cand.size == 0:
                continue
            pick = cand[_cell_subsample(self.Q[cand], score[sus], cell, MAX_SOLVER_SEEDS)]
            X, ok, _ = geo.solve_critical(self.Q[pick], polys, (), tol)
            for i in self._validate_solutions(X, ok, a):
                fr = self.frame(X[i], a)
                if fr.numerical_rank < len(a) or fr.indeterminate:
                    out.append(BoundaryPointRecord(X[i].copy(), a, fr, source="degenerate"))
        if not out:
            return out
        P = np.array([r.point for r in out])
        reps = _dedupe(P, 10 * tol.zero_tol)
        return sorted((out[i] for i in reps), key=BoundaryPointRecord.sort_key)

    # -- critical points ---------------------------------------------------
    @lru_cache(maxsize=None)
    def critical(self, N: VarSet) -> CriticalSearch:
        N = varset(N)
        if not N or N[0] < 1 or N[-1] > self.n:
            raise ValueError(f"N={N} must be a nonempty subset of 1..{self.n}")
        tol = self.tol
        if len(N) + 1 > self.n:
            return CriticalSearch(N, [], degenerate=True,
                                  note="stratum-dimension degenerate: every boundary point qualifies")
        notN = [j for j in range(self.n) if j + 1 not in N]
        out: list[BoundaryPointRecord] = []
        for a, rows in self.active_groups.items():
            if len(N) + len(a) > self.n:
                continue
            polys = [self.polys[i] for i in a]
            G = geo.eval_jacobian(polys, self.Q[rows])
            if len(a) == 1:
                g = G[:, 0, :]
                score = np.linalg.norm(g[:, notN], axis=1) / np.maximum(np.linalg.norm(g, axis=1), 1e-300)
                sel = score < 0.5
            else:
                s = np.linalg.svd(G[:, :, notN], compute_uv=False)
                score = s[:, -1] / np.maximum(np.linalg.norm(G, axis=(1, 2)), 1e-300)
                sel = np.ones(len(rows), dtype=bool)
            cand = rows[sel]
            if cand.size == 0:
                continue
            pick = cand[_cell_subsample(self.Q[cand], score[sel], self.spacing, MAX_SOLVER_SEEDS)]
            X, ok, _ = geo.solve_critical(self.Q[pick], polys, N, tol)
            good = self._validate_solutions(X, ok, a)
            for i, fr in zip(good, self.frames(X[good], a)):
                out.append(BoundaryPointRecord(X[i].copy(), a, fr, source="critical"))
        if out:
            P = np.array([r.point for r in out])
            out = [out[i] for i in _dedupe(P, 10 * tol.zero_tol)]
        out.sort(key=BoundaryPointRecord.sort_key)
        for r in out:
            r.classify([N], tol)
        return CriticalSearch(N, out)

    # -- slicing -------------------------------------------------------------
    def pinned_boundary(self, pins: dict[int, float], band_cells: float = 5.0) -> list[BoundaryPointRecord]:
        """Boundary points with the pinned coordinates (1-based) set to the given values.

        Sampled points within ``band_cells`` grid cells of the slice are moved
        onto it by Newton refinement with the pinned coordinates held fixed.
        """
        if not pins or len(self.Q) == 0:
            return []
        cols = np.array([c - 1 for c in pins])
        vals = np.array([pins[c] for c in pins])
        near = np.all(np.abs(self.Q[:, cols] - vals) <= band_cells * self.spacing[cols], axis=1)
        rows = np.nonzero(near)[0]
        if rows.size == 0:
            return []
        out: list[BoundaryPointRecord] = []
        P0 = self.Q[rows].copy()
        P0[:, cols] = vals
        for j in range(len(self.polys)):
            sel = np.array([r for r, i in enumerate(rows) if j in self.active[i]], dtype=int)
            if sel.size == 0 or len(cols) >= self.n:
                continue
            Qj, st = geo.refine_batch(P0[sel], [self.polys[j]], self.tol, pinned=tuple(pins))
            Qj = Qj[st == 0]
            if len(Qj) == 0:
                continue
            keep = self.in_closure(Qj) & self.in_box(Qj) & self.near_component(Qj)
            Qj = Qj[keep]
            Qj = Qj[_dedupe(Qj, 10 * self.tol.zero_tol)]
            F = self.values(Qj)
            for q, row in zip(Qj, F):
                a = tuple(np.nonzero(np.abs(row) <= self.tol.zero_tol)[0].tolist()) or (j,)
                out.append(BoundaryPointRecord(q.copy(), a, self.frame(q, a), source="slice"))
        if out:
            P = np.array([r.point for r in out])
            out = [out[i] for i in _dedupe(P, 10 * self.tol.zero_tol)]
        return sorted(out, key=BoundaryPointRecord.sort_key)

    # -- reports -------------------------------------------------------------
    def all_records(self, Ns: Sequence[VarSet] = ()) -> list[BoundaryPointRecord]:
        recs = list(self.sample_records)
        for N in Ns:
            recs.extend(self.critical(varset(N)).records)
        recs.extend(self.degeneracies)
        P = np.array([r.point for r in recs]) if recs else np.zeros((0, self.n))
        reps = _dedupe(P, 10 * self.tol.zero_tol)
        # prefer solver-produced records over samples in a cluster
        recs = [recs[i] for i in reps]
        return sorted(recs, key=BoundaryPointRecord.sort_key)


@lru_cache(maxsize=16)
def analyze(spec: RegionSpec) -> RegionAnalysis:
    return RegionAnalysis(spec)


def _witness_cap(ws: list[Witness], notes: list[str]) -> list[Witness]:
    if len(ws) > MAX_WITNESSES:
        notes.append(f"{len(ws)} witnesses, first {MAX_WITNESSES} shown")
        ws = sorted(ws, key=Witness.sort_key)[:MAX_WITNESSES]
    return ws


def check_definition1(spec: RegionSpec) -> ConditionReport:
    """Check the sign-neighbourhood and transversality conditions within the box."""
    an = analyze(spec)
    labels = spec.labels
    report = ConditionReport(meta={"nvars": spec.nvars, "surfaces": list(labels),
                                   "grid_res": an.res, "boundary_points": len(an.Q)})

    # condition (1)
    c1 = ConditionResult("def1-cond1", PASS)
    met = set(i for a in an.active for i in a)
    for i, lab in enumerate(labels):
        if i not in met:
            c1.verdict = FAIL
            c1.witnesses.append(Witness("def1-cond1", [], f"surface {lab} does not meet the closure within the box"))
    if len(an.other_nearby):
        c1.verdict = combine([c1.verdict, INDETERMINATE])
        c1.witnesses.append(Witness("def1-cond1", an.other_nearby[:1].tolist(),
                                    "another component of the positive set lies within 2 grid cells"))
    if len(an.unexplained):
        c1.verdict = combine([c1.verdict, INDETERMINATE])
        c1.witnesses.append(Witness("def1-cond1", an.unexplained[:1].tolist(),
                                    f"{len(an.unexplained)} boundary cells not resolved onto a zero set"))
    report.add(c1)

    # condition (2)
    c2 = ConditionResult("def1-cond2", PASS)
    ws = []
    for rec in an.degeneracies:
        fr = rec.frame
        verdict = FAIL if fr.numerical_rank < len(rec.active) else INDETERMINATE
        c2.verdict = combine([c2.verdict, verdict])
        ws.append(Witness("def1-cond2", [rec.point.tolist()],
                          f"normal frame rank {fr.numerical_rank} < {len(rec.active)}"
                          if verdict == FAIL else "rank decision within the indeterminate band",
                          {"active": [labels[a] for a in rec.active], "rank": fr.numerical_rank,
                           "expected": len(rec.active), "min_ratio": min(fr.ratios) if fr.ratios else 0.0}))
    for r, (rk, mr, ind) in enumerate(an.sample_ranks):
        if ind and rk == len(an.active[r]):
            c2.verdict = combine([c2.verdict, INDETERMINATE])
            ws.append(Witness("def1-cond2", [an.Q[r].tolist()], "rank decision within the indeterminate band",
                              {"active": [labels[a] for a in an.active[r]], "min_ratio": mr}))
    c2.witnesses = _witness_cap(ws, c2.notes)
    multi = sum(1 for a in an.active if len(a) > 1)
    c2.notes.append(f"{multi} sampled points on two or more surfaces")
    report.add(c2)
    report.caveats.extend(an.caveats)
    return report


def find_critical(spec: RegionSpec, N: Sequence[int]) -> CriticalSearch:
    """Refined critical points of the projection onto the ``N`` coordinates."""
    return analyze(spec).critical(varset(N))


def classify_boundary(spec: RegionSpec, Ns: Sequence[Sequence[int]]) -> list[BoundaryPointRecord]:
    """Classify sampled and solver-produced boundary points for each index set in ``Ns``."""
    an = analyze(spec)
    Ns = [varset(N) for N in Ns]
    for N in Ns:
        if not N or N[0] < 1 or N[-1] > spec.nvars:
            raise ValueError(f"N={N} must be a nonempty subset of 1..{spec.nvars}")
    recs = an.all_records([N for N in Ns if len(N) + 1 <= spec.nvars])
    for r in recs:
        r.flags = {}
        r.classify(Ns, spec.tol)
    return recs


def dump_records(spec: RegionSpec, records: Sequence[BoundaryPointRecord]) -> str:
    """Line-oriented dump: coordinates, active labels, flags."""
    lines = ["# x1..xn | active | flags (N=flag)"]
    for r in records:
        coords = " ".join(f"{v:.9g}" for v in r.point)
        act = ",".join(spec.labels[a] for a in r.active)
        flags = " ".join(f"{'{' + ','.join(map(str, N)) + '}'}={v}" for N, v in sorted(r.flags.items()))
        kind = "normal" if r.is_normal else "non-normal"
        lines.append(f"{coords} | {act} | {kind} {flags}".rstrip())
    return "\n".join(lines) + "\n"
