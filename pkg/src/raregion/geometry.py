"""Numerical primitives: grid sampling, Newton refinement, normal frames, rank tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from .poly import Polynomial, VarSet, varset


class NewtonError(RuntimeError):
    """Refinement failed; ``point`` is the last iterate."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class NonConvergence(NewtonError):
    pass


class RankDeficientJacobian(NewtonError):
    pass


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must be nonempty and of equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("box needs lo < hi on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, n: int, lo: float, hi: float) -> "Box":
        return cls((lo,) * n, (hi,) * n)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def axes(self, res: int) -> list[np.ndarray]:
        return [np.linspace(a, b, res) for a, b in zip(self.lo, self.hi)]

    def spacing(self, res: int) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / (res - 1)

    def restrict(self, A: Sequence[int]) -> "Box":
        return Box(tuple(self.lo[a - 1] for a in A), tuple(self.hi[a - 1] for a in A))

    def contains(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= np.array(self.lo) + margin) and np.all(p <= np.array(self.hi) - margin))


@dataclass(frozen=True)
class Tolerances:
    zero_tol: float = 1e-9
    rank_rel_tol: float = 1e-6
    newton_max_iter: int = 50
    grid_res: int = 64
    activation_band: float = 1e-3
    # ratios within a factor sqrt(indeterminate_factor) of rank_rel_tol are ambiguous
    indeterminate_factor: float = 100.0
    # per-axis resolution is lowered in high dimension to keep res**n below this
    max_grid_points: int = 1 << 22

    def __post_init__(self):
        if not (self.zero_tol > 0 and self.rank_rel_tol > 0 and self.activation_band > 0):
            raise ValueError("tolerances must be positive")
        if self.zero_tol >= 1e-4:
            raise ValueError("zero_tol must be < 1e-4")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be positive")
        if self.grid_res < 8:
            raise ValueError("grid_res must be >= 8")

    def resolution(self, n: int) -> int:
        cap = int(math.floor(self.max_grid_points ** (1.0 / n) + 1e-9))
        return max(8, min(self.grid_res, cap))


class RankInfo(NamedTuple):
    rank: int
    ratios: tuple[float, ...]
    indeterminate: bool

    @property
    def min_ratio(self) -> float:
        return min(self.ratios) if self.ratios else 0.0


def numerical_rank(M: np.ndarray, tol: Tolerances) -> RankInfo:
    """Rank from singular values relative to the largest one."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return RankInfo(0, (), False)
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] <= 1e-300:
        return RankInfo(0, tuple(0.0 for _ in s), False)
    ratios = s / s[0]
    rank = int(np.sum(ratios >= tol.rank_rel_tol))
    band = math.sqrt(tol.indeterminate_factor)
    lo, hi = tol.rank_rel_tol / band, tol.rank_rel_tol * band
    indeterminate = bool(np.any((ratios >= lo) & (ratios < hi)))
    return RankInfo(rank, tuple(float(r) for r in ratios), indeterminate)


# ---------------------------------------------------------------------------
# evaluation helpers


def eval_values(polys: Sequence[Polynomial], X: np.ndarray) -> np.ndarray:
    """Values of each polynomial at rows of X, shape ``(m, k)``."""
    X = np.atleast_2d(X)
    if not polys:
        return np.zeros((X.shape[0], 0))
    return np.stack([p.numeric(X) for p in polys], axis=-1)


def eval_jacobian(polys: Sequence[Polynomial], X: np.ndarray) -> np.ndarray:
    """Jacobian rows (gradients), shape ``(m, k, n)``."""
    X = np.atleast_2d(X)
    m, n = X.shape
    J = np.empty((m, len(polys), n))
    for a, p in enumerate(polys):
        for i, g in enumerate(p.grad):
            J[:, a, i] = g.numeric(X)
    return J


def eval_hessians(polys: Sequence[Polynomial], X: np.ndarray) -> np.ndarray:
    """Hessians, shape ``(m, k, n, n)``."""
    X = np.atleast_2d(X)
    m, n = X.shape
    H = np.empty((m, len(polys), n, n))
    for a, p in enumerate(polys):
        for i in range(n):
            for j in range(i, n):
                v = p.hessian[i][j].numeric(X)
                H[:, a, i, j] = v
                H[:, a, j, i] = v
    return H


# ---------------------------------------------------------------------------
# grid sampling


@dataclass
class GridSample:
    """Tensor-grid sample of ``{sign_j * f_j > 0 for all j}`` inside a box."""

    box: Box
    res: int
    axes: list[np.ndarray]
    values: list[np.ndarray]
    members: np.ndarray
    labels: np.ndarray
    ncomponents: int
    report: str = ""

    @property
    def empty(self) -> bool:
        return self.ncomponents == 0

    @property
    def spacing(self) -> np.ndarray:
        return self.box.spacing(self.res)

    def coords(self, idx: np.ndarray) -> np.ndarray:
        """Coordinates of integer grid indices (shape ``(m, n)``)."""
        idx = np.atleast_2d(idx)
        return np.stack([self.axes[i][idx[:, i]] for i in range(idx.shape[1])], axis=-1)

    def nearest_index(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        lo = np.array(self.box.lo)
        k = np.rint((p - lo) / self.spacing).astype(int)
        return np.clip(k, 0, self.res - 1)

    def cloud(self) -> tuple[np.ndarray, np.ndarray]:
        """Member points and their component labels."""
        idx = np.argwhere(self.members)
        return self.coords(idx), self.labels[tuple(idx.T)]


def sample_grid(signs: Sequence[tuple[Polynomial, int]], box: Box, tol: Tolerances) -> GridSample:
    """Sample the sign conditions on a grid and label face-connected components."""
    n = box.dim
    for p, s in signs:
        if p.nvars != n:
            raise ValueError(f"polynomial in {p.nvars} variables, box has dimension {n}")
        if s not in (1, -1):
            raise ValueError("required sign must be +1 or -1")
    res = tol.resolution(n)
    axes = box.axes(res)
    values = [s * p.numeric.on_grid(axes) for p, s in signs]
    members = np.ones((res,) * n, dtype=bool)
    for v in values:
        members &= v > 0
    labels, count = ndimage.label(members)
    report = "" if count else "empty: no grid point satisfies all sign conditions"
    return GridSample(box, res, axes, values, members, labels, int(count), report)


# ---------------------------------------------------------------------------
# Gauss-Newton engine


def _gauss_newton(Z0, system, tol: float, max_iter: int):
    """Batched Gauss-Newton with minimum-norm steps.

    ``system(Z)`` returns residuals ``(m, E)`` and Jacobians ``(m, E, U)``.
    Returns final iterates, convergence mask and residual max-norms.
    """
    Z = np.array(Z0, dtype=float, copy=True)
    m = Z.shape[0]
    ok = np.zeros(m, dtype=bool)
    res = np.full(m, np.inf)
    live = np.arange(m)
    for it in range(max_iter + 1):
        if live.size == 0:
            break
        R, J = system(Z[live])
        r = np.max(np.abs(R), axis=1) if R.shape[1] else np.zeros(live.size)
        res[live] = r
        done = r <= tol
        ok[live[done]] = True
        bad = ~np.all(np.isfinite(R), axis=1)
        live, R, J = live[~done & ~bad], R[~done & ~bad], J[~done & ~bad]
        if it == max_iter or live.size == 0:
            break
        step = -np.einsum("mue,me->mu", np.linalg.pinv(J, rcond=1e-13), R)
        Z[live] += step
    # one polishing step on converged points, kept only where it helps
    idx = np.nonzero(ok)[0]
    if idx.size:
        R, J = system(Z[idx])
        step = -np.einsum("mue,me->mu", np.linalg.pinv(J, rcond=1e-13), R)
        Zp = Z[idx] + step
        Rp, _ = system(Zp)
        rp = np.max(np.abs(Rp), axis=1) if Rp.shape[1] else np.zeros(idx.size)
        better = np.isfinite(rp) & (rp < res[idx])
        Z[idx[better]] = Zp[better]
        res[idx[better]] = rp[better]
    return Z, ok, res


def _newton_system(polys, pinned_cols):
    def system(X):
        F = eval_values(polys, X)
        J = eval_jacobian(polys, X)
        if pinned_cols:
            J[:, :, list(pinned_cols)] = 0.0
        return F, J

    return system


def refine_batch(P0, polys: Sequence[Polynomial], tol: Tolerances, pinned: Sequence[int] = ()):
    """Vectorised :func:`newton_refine`.

    Returns ``(Q, status)``; status 0 converged, 1 non-convergence,
    2 rank-deficient Jacobian at the start, 3 wandered too far.
    """
    P0 = np.atleast_2d(np.asarray(P0, dtype=float))
    m = P0.shape[0]
    status = np.zeros(m, dtype=int)
    if m == 0:
        return P0.copy(), status
    cols = [c - 1 for c in pinned]
    system = _newton_system(polys, cols)
    F0, J0 = system(P0)
    s = np.linalg.svd(J0, compute_uv=False)
    smax = s[:, 0]
    rank_ok = (smax > 1e-300) & (s[:, -1] >= tol.rank_rel_tol * smax)
    if J0.shape[1] > J0.shape[2] - len(cols):
        rank_ok[:] = False
    status[~rank_ok] = 2
    step0 = np.linalg.norm(np.einsum("mue,me->mu", np.linalg.pinv(J0, rcond=1e-13), F0), axis=1)
    Q = P0.copy()
    idx = np.nonzero(rank_ok)[0]
    if idx.size:
        Zq, ok, _ = _gauss_newton(P0[idx], system, tol.zero_tol, tol.newton_max_iter)
        Q[idx] = Zq
        status[idx[~ok]] = 1
        dist = np.linalg.norm(Zq - P0[idx], axis=1)
        far = ok & (dist > 2.0 * step0[idx] + 10 * tol.zero_tol)
        status[idx[far]] = 3
    return Q, status


def newton_refine(p0, polys: Sequence[Polynomial], tol: Tolerances, pinned: Sequence[int] = ()) -> np.ndarray:
    """Project ``p0`` onto the common zero set of ``polys``.

    Coordinates listed in ``pinned`` (1-based) are held fixed.
    """
    p0 = np.asarray(p0, dtype=float)
    if len(polys) > p0.size:
        raise ValueError("more active polynomials than coordinates")
    Q, status = refine_batch(p0[None, :], polys, tol, pinned)
    st = int(status[0])
    if st == 2:
        raise RankDeficientJacobian("Jacobian is rank deficient at the starting point", p0)
    if st == 1:
        raise NonConvergence(f"no convergence after {tol.newton_max_iter} iterations", Q[0])
    if st == 3:
        raise NonConvergence("iterate left the admissible neighbourhood of the start", Q[0])
    return Q[0]


def solve_critical(seeds, polys: Sequence[Polynomial], N: VarSet, tol: Tolerances, pinned: Sequence[int] = ()):
    """Solve for points of ``{f_a = 0}`` where some nonzero normal vector lies in span{e_j : j in N}.

    Unknowns are the point and multipliers ``lam`` (unit norm); residuals are
    ``f_a``, the non-``N`` components of ``sum lam_a grad f_a`` and ``|lam|^2 - 1``.
    With ``N`` empty this locates points where the gradients are dependent.
    Returns ``(X, ok, lam)``.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    m, n = seeds.shape
    k = len(polys)
    if m == 0:
        return seeds.copy(), np.zeros(0, dtype=bool), np.zeros((0, k))
    free = [j for j in range(n) if (j + 1) not in set(N)]
    pcols = [c - 1 for c in pinned]
    J0 = eval_jacobian(polys, seeds)
    M = J0[:, :, free]
    if M.shape[2] == 0:
        lam0 = np.zeros((m, k))
        lam0[:, 0] = 1.0
    else:
        U, _, _ = np.linalg.svd(M)
        lam0 = U[:, :, -1]

    def system(Z):
        X, lam = Z[:, :n], Z[:, n:]
        F = eval_values(polys, X)
        J = eval_jacobian(polys, X)
        H = eval_hessians(polys, X)
        g = np.einsum("mk,mkn->mn", lam, J)[:, free]
        nrm = np.sum(lam**2, axis=1, keepdims=True) - 1.0
        R = np.concatenate([F, g, nrm], axis=1)
        mm = X.shape[0]
        nf = len(free)
        Jac = np.zeros((mm, k + nf + 1, n + k))
        Jac[:, :k, :n] = J
        LH = np.einsum("mk,mkij->mij", lam, H)
        Jac[:, k:k + nf, :n] = LH[:, free, :]
        Jac[:, k:k + nf, n:] = np.transpose(J[:, :, free], (0, 2, 1))
        Jac[:, -1, n:] = 2 * lam
        if pcols:
            Jac[:, :, pcols] = 0.0
        return R, Jac

    Z0 = np.concatenate([seeds, lam0], axis=1)
    Z, ok, _ = _gauss_newton(Z0, system, tol.zero_tol, tol.newton_max_iter)
    return Z[:, :n], ok, Z[:, n:]


# ---------------------------------------------------------------------------
# normal frames and subspace tests


@dataclass
class NormalFrame:
    point: np.ndarray
    active: tuple[int, ...]
    gradients: np.ndarray
    numerical_rank: int
    ratios: tuple[float, ...] = ()
    indeterminate: bool = False

    @property
    def n(self) -> int:
        return self.point.size

    def normal_basis(self) -> np.ndarray:
        """Orthonormal basis (columns) of the span of the gradients."""
        cached = self.__dict__.get("_normal_basis")
        if cached is not None:
            return cached
        if self.numerical_rank == 0:
            U = np.zeros((self.n, 0))
        elif self.gradients.shape[0] == 1:
            g = self.gradients[0]
            U = (g / np.linalg.norm(g))[:, None]
        else:
            _, _, Vt = np.linalg.svd(self.gradients)
            U = Vt[: self.numerical_rank].T
        self.__dict__["_normal_basis"] = U
        return U

    def tangent_basis(self) -> np.ndarray:
        """Orthonormal basis of the common tangent space (null space of the gradients)."""
        if self.gradients.shape[0] == 0:
            return np.eye(self.n)
        _, _, Vt = np.linalg.svd(self.gradients, full_matrices=True)
        return Vt[self.numerical_rank:].T


def normal_frame(q, polys: Sequence[Polynomial], tol: Tolerances, active: Sequence[int] | None = None) -> NormalFrame:
    q = np.asarray(q, dtype=float)
    active = tuple(range(len(polys))) if active is None else tuple(active)
    G = eval_jacobian(polys, q[None, :])[0] if polys else np.zeros((0, q.size))
    info = numerical_rank(G, tol)
    return NormalFrame(q.copy(), active, G, info.rank, info.ratios, info.indeterminate)


def normal_frames(X, polys: Sequence[Polynomial], tol: Tolerances, active: Sequence[int]) -> list[NormalFrame]:
    """``normal_frame`` for every row of X, with one batched Jacobian and SVD."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        return []
    if not polys:
        return [normal_frame(q, polys, tol, active) for q in X]
    G = eval_jacobian(polys, X)
    s = np.linalg.svd(G, compute_uv=False)
    band = math.sqrt(tol.indeterminate_factor)
    lo, hi = tol.rank_rel_tol / band, tol.rank_rel_tol * band
    out = []
    active = tuple(active)
    for q, g, sv in zip(X, G, s):
        if sv[0] <= 1e-300:
            out.append(NormalFrame(q.copy(), active, g, 0, tuple(0.0 for _ in sv), False))
            continue
        r = sv / sv[0]
        out.append(NormalFrame(q.copy(), active, g, int(np.sum(r >= tol.rank_rel_tol)),
                               tuple(float(v) for v in r), bool(np.any((r >= lo) & (r < hi)))))
    return out


def meet_sine(frame: NormalFrame, N: Sequence[int]) -> float:
    """Sine of the smallest principal angle between the normal space and span{e_j : j in N}."""
    N = varset(N)
    U = frame.normal_basis()
    if U.shape[1] == 0 or not N:
        return 1.0
    if U.shape[1] == 1:
        # unit normal u: the sine is the length of u off the N coordinates
        off = np.ones(frame.n, dtype=bool)
        off[[j - 1 for j in N]] = False
        return float(np.linalg.norm(U[off, 0]))
    V = np.zeros((frame.n, len(N)))
    for c, j in enumerate(N):
        V[j - 1, c] = 1.0
    R = V - U @ (U.T @ V)
    return float(np.linalg.svd(R, compute_uv=False).min())


def subspace_meets(frame: NormalFrame, N: Sequence[int], tol: Tolerances) -> bool:
    """Whether some nonzero normal vector lies in span{e_j : j in N}."""
    return meet_sine(frame, N) < tol.rank_rel_tol


def projection_is_critical(frame: NormalFrame, N: Sequence[int], tol: Tolerances) -> bool:
    """Critical-point test for the coordinate projection restricted to the stratum.

    Works on the tangent space: the differential of the projection onto the
    ``N`` coordinates, restricted to the tangent space, drops rank.
    """
    N = varset(N)
    T = frame.tangent_basis()
    target = min(len(N), T.shape[1])
    if target == 0:
        return True
    D = T[[j - 1 for j in N], :]
    s = np.linalg.svd(D, compute_uv=False)
    return bool(len(s) < target or s[target - 1] < tol.rank_rel_tol)


def projected_rank(frames: Sequence[NormalFrame], N, tol: Tolerances) -> RankInfo:
    """Rank of the N-truncated first gradients of ``frames``.

    ``N`` is one index set for all frames or a list with one per frame.
    """
    if frames and isinstance(N[0], (tuple, list)):
        Ns = [varset(x) for x in N]
    else:
        Ns = [varset(N)] * len(frames)
    rows = [f.gradients[0][[j - 1 for j in Nf]] for f, Nf in zip(frames, Ns)]
    if not rows:
        return RankInfo(0, (), False)
    return numerical_rank(np.array(rows), tol)


def projected_independence(frames: Sequence[NormalFrame], N, tol: Tolerances) -> bool:
    if not frames:
        return True
    width = len(N[0]) if isinstance(N[0], (tuple, list)) else len(N)
    if len(frames) > width:
        return False
    if any(len(f.active) != 1 for f in frames):
        raise ValueError("projected independence needs normal points (one active surface)")
    info = projected_rank(frames, N, tol)
    return info.rank == len(frames)
