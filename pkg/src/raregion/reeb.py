"""Reeb digraph of a coordinate function on a sampled region.

The region's grid mask is swept along one axis.  Slice components are
tracked by shared cells between consecutive slices; a change in the
overlap pattern is an event, located between two grid planes and then
pinned down either by a unique critical value of the projection or by
bisection on the slice component count.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import eval_values
from .region import EmptySampleError, RegionSpec, analyze

BIRTH, DEATH, MERGE, SPLIT, ENDPOINT = "birth", "death", "merge", "split", "regular-endpoint"
RESOLUTION = 1e-6


@dataclass
class ReebVertex:
    value: float
    component: int
    kind: str


@dataclass
class ReebEdge:
    src: int
    dst: int
    interval: tuple[float, float]


@dataclass
class ReebDigraph:
    coord: int
    vertices: list[ReebVertex] = field(default_factory=list)
    edges: list[ReebEdge] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def indeterminate(self) -> bool:
        return bool(self.flags)

    def kinds(self) -> list[str]:
        return [v.kind for v in self.vertices]

    def is_monotone(self) -> bool:
        return all(self.vertices[e.src].value < self.vertices[e.dst].value for e in self.edges)

    def is_acyclic(self) -> bool:
        indeg = [0] * len(self.vertices)
        adj: list[list[int]] = [[] for _ in self.vertices]
        for e in self.edges:
            adj[e.src].append(e.dst)
            indeg[e.dst] += 1
        stack = [v for v, d in enumerate(indeg) if d == 0]
        seen = 0
        while stack:
            v = stack.pop()
            seen += 1
            for w in adj[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    stack.append(w)
        return seen == len(self.vertices)

    def euler_consistent(self) -> bool:
        """Components entering plus births and splits equal those leaving plus deaths and merges."""
        ins = outs = 0
        for k, v in enumerate(self.vertices):
            n_in = sum(1 for e in self.edges if e.dst == k)
            n_out = sum(1 for e in self.edges if e.src == k)
            if v.kind == ENDPOINT:
                ins += n_out
                outs += n_in
            elif v.kind == BIRTH and (n_in, n_out) != (0, 1):
                return False
            elif v.kind == DEATH and (n_in, n_out) != (1, 0):
                return False
        return ins == outs


def _label(mask: np.ndarray) -> tuple[np.ndarray, int]:
    if mask.ndim == 0:
        return mask.astype(int), int(mask)
    return ndimage.label(mask)


def _overlap_groups(la, na, lb, nb) -> list[tuple[list[int], list[int]]]:
    """Connected groups of the bipartite overlap graph between two labelled slices."""
    parent = list(range(na + nb))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    both = (la > 0) & (lb > 0)
    for a, b in set(zip(la[both].ravel().tolist(), lb[both].ravel().tolist())):
        ra, rb = find(a - 1), find(na + b - 1)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, tuple[list, list]] = {}
    for a in range(na):
        groups.setdefault(find(a), ([], []))[0].append(a + 1)
    for b in range(nb):
        groups.setdefault(find(na + b), ([], []))[1].append(b + 1)
    return [groups[k] for k in sorted(groups)]


class _Slicer:
    """Slice membership of the region's positive set at an arbitrary sweep value."""

    def __init__(self, spec: RegionSpec, an, axis: int):
        self.spec, self.an, self.axis = spec, an, axis
        self.other = [k for k in range(spec.nvars) if k != axis]

    def count(self, t: float, footprint: np.ndarray) -> int:
        """Components of the positive slice at ``t`` meeting the (dilated) footprint."""
        if not self.other:
            x = np.array([[t]])
            return int(np.all(eval_values(self.spec.polys, x) > 0))
        grids = np.meshgrid(*[self.an.axes[k] for k in self.other], indexing="ij")
        X = np.empty(grids[0].shape + (self.spec.nvars,))
        X[..., self.axis] = t
        for g, k in zip(grids, self.other):
            X[..., k] = g
        vals = eval_values(self.spec.polys, X.reshape(-1, self.spec.nvars))
        mask = np.all(vals > 0, axis=1).reshape(grids[0].shape)
        lab, _ = ndimage.label(mask)
        hit = np.unique(lab[footprint & (lab > 0)])
        return len(hit)


def _candidates(spec: RegionSpec, an, coord: int) -> np.ndarray:
    vals = []
    if spec.nvars >= 2:
        vals += [p[coord - 1] for p in an.critical((coord,)).points]
    else:
        vals += [q[0] for q in an.Q]
    vals += [q[coord - 1] for q, a in zip(an.Q, an.active) if len(a) >= spec.nvars]
    return np.array(sorted(vals))


def reeb_digraph(spec: RegionSpec, coord: int) -> ReebDigraph:
    if not 1 <= coord <= spec.nvars:
        raise ValueError(f"coord must lie in 1..{spec.nvars}")
    try:
        an = analyze(spec)
    except EmptySampleError as exc:
        return ReebDigraph(coord, flags=[str(exc)])
    axis = coord - 1
    ax = an.axes[axis]
    h = float(an.spacing[axis])
    g = ReebDigraph(coord)
    cands = _candidates(spec, an, coord)
    slicer = _Slicer(spec, an, axis)
    D = np.moveaxis(an.dmask, axis, 0)
    open_tracks: dict[int, tuple[int, float]] = {}  # slice label -> (start vertex, start value)

    def add_vertex(value, kind, comp):
        g.vertices.append(ReebVertex(float(value), int(comp), kind))
        return len(g.vertices) - 1

    def close(track, v):
        src, _ = track
        g.edges.append(ReebEdge(src, v, (g.vertices[src].value, g.vertices[v].value)))

    la, na = _label(D[0])
    for a in range(1, na + 1):
        open_tracks[a] = (add_vertex(ax[0], ENDPOINT, a), ax[0])
    comp_id = na
    for k in range(len(ax) - 1):
        lb, nb = _label(D[k + 1])
        new_tracks: dict[int, tuple[int, float]] = {}
        for A, B in _overlap_groups(la, na, lb, nb):
            if len(A) == 1 and len(B) == 1:
                new_tracks[B[0]] = open_tracks[A[0]]
                continue
            if not A:
                kind = BIRTH
            elif not B:
                kind = DEATH
            else:
                kind = MERGE if len(A) > len(B) else SPLIT
            lo_fp = np.isin(la, A) if A else np.zeros_like(la, dtype=bool)
            hi_fp = np.isin(lb, B) if B else np.zeros_like(lb, dtype=bool)
            fp = ndimage.binary_dilation(lo_fp | hi_fp, iterations=2) if lo_fp.ndim else (lo_fp | hi_fp)
            value = _locate(ax[k], ax[k + 1], h, cands, slicer, fp, len(A), len(B))
            comp_id += 1
            v = add_vertex(value, kind, comp_id)
            for a in A:
                close(open_tracks[a], v)
            for b in B:
                new_tracks[b] = (v, value)
        open_tracks = new_tracks
        la, na = lb, nb
    for a in sorted(open_tracks):
        v = add_vertex(ax[-1], ENDPOINT, a)
        close(open_tracks[a], v)
    _finalize(g, h)
    return g


def _locate(lo, hi, h, cands, slicer, fp, a, b) -> float:
    near = cands[(cands >= lo - h) & (cands <= hi + h)] if len(cands) else cands
    if len(near):
        uniq = np.unique(np.round(near, 7))
        if len(uniq) == 1:
            return float(near[np.argmin(np.abs(near - uniq[0]))])
    # bisection on the component count of the event's footprint
    if slicer.count(lo, fp) != a or slicer.count(hi, fp) != b:
        return 0.5 * (lo + hi)
    while hi - lo > RESOLUTION:
        mid = 0.5 * (lo + hi)
        if slicer.count(mid, fp) == a:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _finalize(g: ReebDigraph, h: float) -> None:
    """Sort vertices by value, renumber edges and flag events closer than one grid cell."""
    order = sorted(range(len(g.vertices)), key=lambda k: (g.vertices[k].value, g.vertices[k].kind,
                                                        g.vertices[k].component))
    remap = {old: new for new, old in enumerate(order)}
    g.vertices = [g.vertices[k] for k in order]
    for e in g.edges:
        e.src, e.dst = remap[e.src], remap[e.dst]
    g.edges.sort(key=lambda e: (e.src, e.dst))
    events = [v for v in g.vertices if v.kind != ENDPOINT]
    for v1, v2 in zip(events, events[1:]):
        if v2.value - v1.value < h:
            g.flags.append(f"events at {v1.value:.6f} and {v2.value:.6f} are within one grid cell")


def export_dot(g: ReebDigraph) -> str:
    lines = ["digraph reeb {"]
    for k, v in enumerate(g.vertices):
        lines.append(f'  v{k} [label="{v.value:.6f} {v.kind}"];')
    for e in g.edges:
        lines.append(f"  v{e.src} -> v{e.dst};")
    lines.append("}")
    return "\n".join(lines) + "\n"
