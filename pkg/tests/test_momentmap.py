import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from raregion import geometry as geo
from raregion import momentmap as mm
from raregion.poly import evaluate_exact, parse

from conftest import EX1_F1, EX1_F2, region

TOL = geo.Tolerances()


@pytest.fixture(scope="module")
def ex1_input(example1):
    return mm.MomentMapInput(example1, (1, 2), (0, 0))


def test_ls_identity_passes(ex1_input):
    assert mm.validate_ls(ex1_input).verdict == "pass"


def test_ls_constant_fails(example1):
    res = mm.validate_ls(mm.MomentMapInput(example1, (1, 1), (0,)))
    assert res.verdict == "fail"
    q = np.array(res.witnesses[0].points[0])
    assert max(abs(f.numeric(q)) for f in example1.polys) <= 1e-9
    assert -0.5 - 1e-9 <= q[0] <= 0.5 + 1e-9


def test_ls_constant_far_apart_passes():
    spec = region(2, ["1-x1^2-x2^2", "(x1-5)^2+x2^2-1"], (0, 0), lo=-8, hi=8)
    assert mm.validate_ls(mm.MomentMapInput(spec, (1, 1), (0,))).verdict == "pass"


@pytest.mark.parametrize("ls,d", [((1, 3), (0, 0)), ((1, 1), (0, 0)), ((1,), (0,)), ((1, 2), (0, -1))])
def test_bad_input(example1, ls, d):
    with pytest.raises(mm.MomentMapError):
        mm.MomentMapInput(example1, ls, d)


def test_build_example1(ex1_input):
    sys = mm.build_system(ex1_input)
    assert sys.total_vars == 5 and len(sys.equations) == 2
    assert sys.y_blocks == ((4,), (5,))
    assert sys.equations[0] == parse(EX1_F1 + "-x4^2", 5)
    assert sys.equations[1] == parse(EX1_F2 + "-x5^2", 5)


def test_build_single_surface_circle():
    spec = region(2, ["1-x1^2-x2^2"], (0, 0))
    sys = mm.build_system(mm.MomentMapInput(spec, (1,), (1,)))
    assert sys.equations == (parse("1-x1^2-x2^2-x3^2-x4^2", 4),)


def test_grouped_product():
    spec = region(2, ["(x1-5)^2+x2^2-1", "1-x1^2-x2^2"], (0, 0), lo=-8, hi=8)
    sys = mm.build_system(mm.MomentMapInput(spec, (1, 1), (2,)))
    assert sys.total_vars == 5
    prod = parse("((x1-5)^2+x2^2-1)*(1-x1^2-x2^2)", 5)
    assert sys.equations[0] == prod - parse("x3^2+x4^2+x5^2", 5)


def test_fiber_over_origin(ex1_input):
    sys = mm.build_system(ex1_input)
    F = mm.sample_fiber(sys, [0, 0, 0])
    r = np.sqrt(0.75)
    expect = {(0.0, 0.0, 0.0, a * r, b * r) for a in (-1, 1) for b in (-1, 1)}
    assert {tuple(row) for row in F} == expect
    assert np.allclose(mm.project(sys, [0, 0, 0, r, r]), 0)


def test_fiber_collapses_on_boundary(ex1_input):
    sys = mm.build_system(ex1_input)
    F = mm.sample_fiber(sys, [-0.5, 0, 0])
    assert len(F) == 2 and np.all(F[:, 3] == 0)
    assert sorted(F[:, 4]) == [-1.0, 1.0]


def test_outside_point_rejected(ex1_input):
    sys = mm.build_system(ex1_input)
    with pytest.raises(mm.MomentMapError):
        mm.sample_fiber(sys, [1.9, 0, 0])
    with pytest.raises(mm.MomentMapError):
        mm.project(sys, [0, 0, 0, 1, 1])


SYSTEMS = [
    ((1, 2), (0, 0)),
    ((1, 2), (1, 0)),
    ((1, 2), (2, 3)),
]


@settings(max_examples=30)
@given(st.sampled_from(SYSTEMS), st.integers(0, 10_000), st.booleans())
def test_residual_and_image_invariants(example1, cfg, k, interior):
    inp = mm.MomentMapInput(example1, *cfg)
    sys = mm.build_system(inp)
    P = mm.base_points(inp, 200, interior)
    x = P[k % len(P)]
    F = mm.sample_fiber(sys, x)
    assert np.max(np.abs(sys.residuals(F))) <= 1e-10
    for z in F:
        assert np.array_equal(mm.project(sys, z), x)
    assert np.all(example1.polys[0].numeric(x) >= -1e-9) and np.all(example1.polys[1].numeric(x) >= -1e-9)


def test_fiber_cardinality_by_sign_enumeration(ex1_input):
    sys = mm.build_system(ex1_input)
    for x in mm.base_points(ex1_input, 50):
        vals = [float(evaluate_exact(f, [Fraction(float(v)) for v in x])) for f in ex1_input.region.polys]
        oracle = {tuple(s * np.sqrt(v) for s, v in zip(signs, vals))
                  for signs in itertools.product((1, -1), repeat=len(vals))}
        F = mm.sample_fiber(sys, x)
        assert len(F) == 2 ** len(sys.equations)
        assert {tuple(z[3:]) for z in F} == oracle


def test_jacobian_full_rank_off_zero_fibers(ex1_input):
    sys = mm.build_system(ex1_input)
    for x in mm.base_points(ex1_input, 40):
        for z in mm.sample_fiber(sys, x):
            assert mm.jacobian_rank(sys, z, TOL).rank == 2


def test_export_round_trip(ex1_input):
    sys = mm.build_system(ex1_input)
    text = mm.export_system(sys)
    assert text.startswith("vars: 5\n")
    nv, eqs = mm.parse_system(text)
    assert nv == 5 and tuple(eqs) == sys.equations
    with pytest.raises(mm.MomentMapError):
        mm.parse_system("x1-1\n")
