import numpy as np
import pytest
from hypothesis import given, strategies as st

from raregion import geometry as geo
from raregion.geometry import Box, Tolerances
from raregion.poly import evaluate, parse

from conftest import EX1_F1

TOL = Tolerances()
CIRCLE = parse("1-x1^2-x2^2", 2)


def test_tolerance_validation():
    with pytest.raises(ValueError):
        Tolerances(zero_tol=1e-3)
    with pytest.raises(ValueError):
        Tolerances(grid_res=4)
    assert Tolerances().resolution(4) == 45
    assert Tolerances().resolution(2) == 64


def test_box_validation_and_restrict():
    with pytest.raises(ValueError):
        Box((0, 1), (1, 1))
    b = Box.cube(3, -2, 2).restrict((1, 3))
    assert b.dim == 2 and b.lo == (-2, -2)


def test_newton_refine_onto_circle():
    q = geo.newton_refine([0.9, 0.1], [CIRCLE], TOL)
    assert abs(evaluate(CIRCLE, q)) <= 1e-10
    assert np.linalg.norm(q - np.array([0.9, 0.1]) / np.linalg.norm([0.9, 0.1])) < 1e-6


def test_newton_tangent_circles_rank_deficient():
    other = parse("1-(x1-2)^2-x2^2", 2)
    with pytest.raises(geo.RankDeficientJacobian):
        geo.newton_refine([1.0, 0.0], [CIRCLE, other], TOL)


def test_newton_no_real_solution():
    with pytest.raises(geo.NewtonError):
        geo.newton_refine([0.5, 0.5], [parse("x1^2+x2^2+1", 2)], TOL)


def test_pinned_refinement_keeps_coordinate():
    Q, st_ = geo.refine_batch(np.array([[0.3, 0.8]]), [CIRCLE], TOL, pinned=(1,))
    assert st_[0] == 0 and Q[0, 0] == 0.3
    assert Q[0, 1] == pytest.approx(np.sqrt(1 - 0.09), abs=1e-12)


def test_solve_critical_circle_extremes():
    f = parse(EX1_F1, 2)
    seeds = np.array([[1.4, 0.2], [-0.4, -0.3]])
    X, ok, _ = geo.solve_critical(seeds, [f], (1,), TOL)
    assert ok.all()
    assert np.allclose(sorted(X[:, 0]), [-0.5, 1.5], atol=1e-9)
    assert np.allclose(X[:, 1], 0, atol=1e-9)


def test_numerical_rank_and_band():
    assert geo.numerical_rank(np.diag([1.0, 1e-3]), TOL).rank == 2
    assert geo.numerical_rank(np.diag([1.0, 1e-9]), TOL).rank == 1
    info = geo.numerical_rank(np.diag([1.0, 2e-6]), TOL)
    assert info.rank == 2 and info.indeterminate
    assert geo.numerical_rank(np.zeros((2, 2)), TOL).rank == 0


def test_frame_example1():
    f1 = parse(EX1_F1, 3)
    fr = geo.normal_frame([1.5, 0, 0], [f1], TOL)
    assert np.allclose(fr.gradients, [[-2, 0, 0]])
    assert fr.numerical_rank == 1
    assert geo.subspace_meets(fr, (1,), TOL)
    assert not geo.subspace_meets(fr, (2,), TOL)
    assert geo.projection_is_critical(fr, (1,), TOL)


def test_projected_independence_example3_crossing():
    # truncated normals of the two singular circles where their projections cross
    f1 = parse("1-(x1-1/2)^2-x2^2", 2)
    f2 = parse("11/10-(x1+1/2)^2-x2^2", 2)
    x1 = 0.05
    x2 = np.sqrt(1 - (x1 - 0.5) ** 2)
    frames = [geo.normal_frame([x1, x2], [f], TOL) for f in (f1, f2)]
    assert geo.projected_independence(frames, (1, 2), TOL)
    assert not geo.projected_independence(frames, (2,), TOL)  # two vectors in one dimension


@given(st.floats(0, 2 * np.pi), st.fractions(min_value="1/4", max_value=3, max_denominator=16))
def test_meet_sine_on_circle(t, r):
    # on a circle of radius r the x1-sine equals |sin t|
    f = parse("-x1^2-x2^2", 2) + r * r
    fr = geo.normal_frame([float(r) * np.cos(t), float(r) * np.sin(t)], [f], TOL)
    assert geo.meet_sine(fr, (1,)) == pytest.approx(abs(np.sin(t)), abs=1e-9)


def test_grid_sample_components():
    ann = [(CIRCLE, 1), (parse("x1^2+x2^2-1/4", 2), 1)]
    g = geo.sample_grid(ann, Box.cube(2, -2, 2), TOL)
    assert g.ncomponents == 1
    two = [(parse("x1^2-1/4", 2), 1), (parse("4-x1^2", 2), 1)]
    assert geo.sample_grid(two, Box.cube(2, -3, 3), TOL).ncomponents == 2
