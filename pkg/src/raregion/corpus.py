"""Generated two-block circle configurations in R^3.

Blocks are {1,2} and {1,3}.  Each block carries one or two circles with
centers and radii on a half-integer lattice; a second circle may bound
from outside.  Lattice data makes coincident special values common, so the
corpus contains both passing and failing configurations.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .decomposition import BlockFamily, DecompositionInput, check_prar
from .geometry import Box, Tolerances
from .poly import parse
from .region import CylinderSurface

CENTERS = [Fraction(k, 2) for k in range(-2, 3)]
RADII = [Fraction(1, 2), Fraction(1), Fraction(3, 2)]
BLOCKS = ((1, 2), (1, 3))


def circle_text(a: Fraction, b: Fraction, r: Fraction, other: int, inside: bool) -> str:
    body = f"(x1 - ({a}))^2 + (x{other} - ({b}))^2 - ({r * r})"
    return f"-({body})" if inside else body


def _seed(texts: list[str], box: Box) -> tuple[float, ...] | None:
    """Grid point of the box maximising the smallest surface value; None if none is positive."""
    polys = [parse(t, 3) for t in texts]
    axes = box.axes(49)
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    worst = np.min(np.stack([p.numeric(X) for p in polys], axis=1), axis=1)
    k = int(np.argmax(worst))
    if worst[k] <= 0.05:
        return None
    return tuple(float(v) for v in X[k])


def random_config(rng: np.random.Generator, tol: Tolerances = Tolerances()) -> DecompositionInput | None:
    texts, assignment, labels = [], [], []
    for blk, (_, other) in enumerate(BLOCKS):
        count = int(rng.integers(1, 3))
        for k in range(count):
            a, b = (CENTERS[int(i)] for i in rng.integers(0, len(CENTERS), 2))
            r = RADII[int(rng.integers(0, len(RADII)))]
            inside = k == 0 or bool(rng.integers(0, 2))
            texts.append(circle_text(a, b, r, other, inside))
            assignment.append(blk)
            labels.append(f"C{blk + 1}{k + 1}")
    box = Box.cube(3, -3, 3)
    seed = _seed(texts, box)
    if seed is None:
        return None
    surfaces = tuple(CylinderSurface(lab, parse(t, 3)) for lab, t in zip(labels, texts))
    return DecompositionInput(surfaces, BlockFamily(BLOCKS, 3), tuple(assignment), box, seed, None, tol)


def thm2_corpus(count: int = 50, seed: int = 20240601, max_tries: int = 1000) -> list[DecompositionInput]:
    """First ``count`` generated configurations whose block conditions all pass."""
    rng = np.random.default_rng(seed)
    out: list[DecompositionInput] = []
    seen = set()
    for _ in range(max_tries):
        if len(out) >= count:
            break
        inp = random_config(rng)
        if inp is None or inp in seen:
            continue
        seen.add(inp)
        if all(r.verdict == "pass" for r in check_prar(inp)):
            out.append(inp)
    return out
