from fractions import Fraction

import numpy as np
import pytest

from raregion.poly import evaluate_exact
from raregion.reeb import BIRTH, DEATH, ENDPOINT, MERGE, SPLIT, export_dot, reeb_digraph
from raregion.region import find_critical

from conftest import region

DISK = region(2, ["1-x1^2-x2^2"], (0, 0))
ANNULUS = region(2, ["1-x1^2-x2^2", "x1^2+x2^2-1/4"], (0, 0.75))
BITTEN = region(2, ["1-x1^2-x2^2", "(x1-1)^2+(x2-1/5)^2-1/4"], (0, 0))
TWO_LOBES = region(2, ["1-x1^2-x2^2", "(x1+1)^2+(x2-1/5)^2-1/4"], (0, 0))
INTERVAL = region(1, ["1-x1^2"], (0,))


def slice_count(spec, t, samples=1001):
    """Oracle: runs of positive exact values along a dense line x1 = t."""
    lo, hi = spec.box.lo[1], spec.box.hi[1]
    inside = []
    for k in range(samples):
        y = Fraction(lo) + (Fraction(hi) - Fraction(lo)) * k / (samples - 1)
        x = [Fraction(t), y]
        inside.append(all(evaluate_exact(p, x) > 0 for p in spec.polys))
    return sum(1 for k, v in enumerate(inside) if v and (k == 0 or not inside[k - 1]))


def graph_count(g, t):
    return sum(1 for e in g.edges if e.interval[0] < t < e.interval[1])


@pytest.mark.parametrize("spec", [DISK, ANNULUS, BITTEN, TWO_LOBES], ids=["disk", "annulus", "bitten", "lobes"])
def test_slice_counts_match_oracle(spec):
    g = reeb_digraph(spec, 1)
    assert not g.flags
    events = [v.value for v in g.vertices]
    for t in np.round(np.arange(-1.99, 2.0, 0.0625), 4):
        if min(abs(t - e) for e in events) < 0.02:
            continue
        assert graph_count(g, t) == slice_count(spec, t), t


def test_disk_path():
    g = reeb_digraph(DISK, 1)
    assert g.kinds() == [BIRTH, DEATH]
    assert np.allclose([v.value for v in g.vertices], [-1, 1], atol=1e-6)
    assert [(e.src, e.dst) for e in g.edges] == [(0, 1)]


def test_example1_path(example1):
    g = reeb_digraph(example1, 1)
    assert g.kinds() == [BIRTH, DEATH]
    assert np.allclose([v.value for v in g.vertices], [-0.5, 0.5], atol=1e-6)
    assert len(g.edges) == 1


def test_annulus():
    g = reeb_digraph(ANNULUS, 1)
    assert g.kinds() == [BIRTH, SPLIT, MERGE, DEATH]
    assert np.allclose([v.value for v in g.vertices], [-1, -0.5, 0.5, 1], atol=1e-6)
    assert len(g.edges) == 4


def test_corner_event_is_located():
    g = reeb_digraph(BITTEN, 1)
    deaths = sorted(v.value for v in g.vertices if v.kind == DEATH)
    # subtracting the circle equations gives x1 = 179/200 - x2/5; substitute into the unit circle
    x2 = np.roots([26 / 25, -179 / 500, (179 / 200) ** 2 - 1])
    corners = sorted(179 / 200 - x2 / 5)
    assert np.allclose(deaths, corners, atol=1e-6)


def test_one_dimensional_interval():
    g = reeb_digraph(INTERVAL, 1)
    assert g.kinds() == [BIRTH, DEATH]
    assert np.allclose([v.value for v in g.vertices], [-1, 1], atol=1e-6)


def test_region_below_grid_resolution_gives_empty_graph():
    g = reeb_digraph(region(2, ["1/1000000-x1^2-x2^2"], (0, 0)), 1)
    assert g.vertices == [] and g.edges == [] and g.indeterminate
    assert export_dot(g) == "digraph reeb {\n}\n"


def test_unbounded_region_has_endpoints():
    g = reeb_digraph(region(2, ["x2+1"], (0, 0)), 1)
    assert g.kinds() == [ENDPOINT, ENDPOINT]
    assert [v.value for v in g.vertices] == [-2, 2]


@pytest.mark.parametrize("spec", [DISK, ANNULUS, BITTEN, TWO_LOBES, INTERVAL])
def test_structural_invariants(spec):
    g = reeb_digraph(spec, 1)
    assert g.is_acyclic() and g.is_monotone() and g.euler_consistent()


@pytest.mark.parametrize("spec", [DISK, ANNULUS])
def test_events_match_critical_values(spec):
    g = reeb_digraph(spec, 1)
    crit = np.array([p[0] for p in find_critical(spec, (1,)).points])
    for v in g.vertices:
        if v.kind != ENDPOINT:
            assert np.min(np.abs(crit - v.value)) <= 1e-4


def test_events_match_critical_values_3d(example1):
    g = reeb_digraph(example1, 1)
    crit = np.array([p[0] for p in find_critical(example1, (1,)).points])
    for v in g.vertices:
        assert np.min(np.abs(crit - v.value)) <= 1e-4


def test_dot_export():
    text = export_dot(reeb_digraph(ANNULUS, 1))
    assert text.splitlines()[0] == "digraph reeb {"
    assert text.count(" -> ") == 4 and text.count("[label=") == 4
    assert '"-0.500000 split"' in text
    assert text == export_dot(reeb_digraph(ANNULUS, 1))


def test_bad_coord():
    with pytest.raises(ValueError):
        reeb_digraph(DISK, 3)
