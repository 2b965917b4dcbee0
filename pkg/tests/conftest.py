from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from raregion.decomposition import BlockFamily, DecompositionInput
from raregion.geometry import Box
from raregion.poly import parse
from raregion.region import CylinderSurface, RegionSpec

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"


def surf(label, text, n):
    return CylinderSurface(label, parse(text, n))


def region(n, texts, seed, lo=-2, hi=2):
    surfaces = tuple(surf(f"S{k + 1}", t, n) for k, t in enumerate(texts))
    return RegionSpec(n, surfaces, seed, Box.cube(n, lo, hi))


def two_block(texts1, texts2, seed, blocks=((1, 2), (1, 3)), n=3, lo=-2, hi=2):
    surfaces, assignment = [], []
    for b, texts in enumerate((texts1, texts2)):
        for k, t in enumerate(texts):
            surfaces.append(surf(f"S{b + 1}{k + 1}", t, n))
            assignment.append(b)
    return DecompositionInput(tuple(surfaces), BlockFamily(blocks, n), tuple(assignment),
                              Box.cube(n, lo, hi), seed)


EX1_F1 = "1-(x1-1/2)^2-x2^2"
EX1_F2 = "1-(x1+1/2)^2-x3^2"
TANGENT_F2 = "1-(x1-1/2)^2-x3^2"
EX3_F1 = "1-(x1-1/2)^2-x2^2-x3^2"
EX3_F2 = "1+1/10-(x1+1/2)^2-x2^2-x4^2"


@pytest.fixture(scope="session")
def disk():
    return region(2, ["1-x1^2-x2^2"], (0, 0))


@pytest.fixture(scope="session")
def example1():
    return region(3, [EX1_F1, EX1_F2], (0, 0, 0))


@pytest.fixture(scope="session")
def tangential():
    return region(3, [EX1_F1, TANGENT_F2], (0.5, 0, 0))


@pytest.fixture(scope="session")
def example1_dec():
    return two_block([EX1_F1], [EX1_F2], (0, 0, 0))


@pytest.fixture(scope="session")
def aligned_dec():
    return two_block([EX1_F1], [TANGENT_F2], (0.5, 0, 0))


def example3_dec(r="1/10"):
    return two_block([EX3_F1], [f"1+{r}-(x1+1/2)^2-x2^2-x4^2"], (0, 0, 0, 0),
                     blocks=((1, 2, 3), (1, 2, 4)), n=4)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
