from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from raregion.poly import (ParseError, Polynomial, embed, evaluate, evaluate_exact, gradient,
                           parse, relabel, support, to_text)

from conftest import EX1_F1


def test_parse_example1_f1_terms():
    p = parse(EX1_F1, 3)
    assert p.terms == {(0, 0, 0): Fraction(3, 4), (1, 0, 0): 1, (2, 0, 0): -1, (0, 2, 0): -1}


def test_parse_product_expands():
    assert to_text(parse("(x1+x2)*(x1-x2)", 2)) == "x1^2 - x2^2"


def test_parse_decimal_and_star_power():
    assert parse("0.25*x1**2", 1) == parse("1/4*x1^2", 1)


@pytest.mark.parametrize("text", ["x1 +", "x3", "(x1", "x1/x2", "x1^-1", "1/0", "2 x1"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse(text, 2)


def test_evaluate_examples():
    assert evaluate(parse(EX1_F1, 3), (0.5, 0, 0)) == 1.0
    f2 = parse("1+1/10-(x1+1/2)^2-x2^2-x4^2", 4)
    assert evaluate_exact(f2, (Fraction(-1, 2), 0, 0, 0)) == Fraction(11, 10)
    with pytest.raises(ValueError):
        evaluate(f2, (0, 0))


def test_gradient_example1():
    g = gradient(parse(EX1_F1, 3))
    assert [to_text(c) for c in g] == ["-2*x1 + 1", "-2*x2", "0"]


def test_support_examples():
    assert support(parse(EX1_F1, 3)) == (1, 2)
    assert support(parse("1+1/10-(x1+1/2)^2-x2^2-x4^2", 4)) == (1, 2, 4)
    assert support(parse("7", 3)) == ()


def test_relabel_substitution_oracle():
    f2 = parse("1-(x1+1/2)^2-x3^2", 3)
    g = relabel(f2, (1, 3))
    assert g.nvars == 2 and g == parse("1-(x1+1/2)^2-x2^2", 2)
    rng = np.random.default_rng(0)
    for y in rng.uniform(-3, 3, size=(100, 2)):
        assert evaluate(g, y) == pytest.approx(evaluate(f2, (y[0], 123.0, y[1])), abs=1e-12)
    with pytest.raises(ValueError):
        relabel(f2, (1, 2))


# random sparse polynomials with small rational coefficients
coef = st.fractions(min_value=-5, max_value=5, max_denominator=6)
mono = st.tuples(*[st.integers(0, 3)] * 3)
polys = st.dictionaries(mono, coef, max_size=6).map(lambda d: Polynomial(3, d))
points = st.tuples(*[st.fractions(min_value=-3, max_value=3, max_denominator=8)] * 3)


@given(polys, polys, points)
def test_arithmetic_matches_pointwise(p, q, x):
    assert evaluate_exact(p * q, x) == evaluate_exact(p, x) * evaluate_exact(q, x)
    assert evaluate_exact(p + q, x) == evaluate_exact(p, x) + evaluate_exact(q, x)
    assert evaluate_exact(p - q, x) == evaluate_exact(p, x) - evaluate_exact(q, x)


@given(polys)
def test_text_round_trip(p):
    assert parse(to_text(p), 3) == p


@given(polys, points)
def test_embed_inverts_relabel(p, x):
    A = support(p)
    if not A:
        return
    assert embed(relabel(p, A), 3, A) == p


@given(polys, st.tuples(*[st.floats(-2, 2)] * 3))
def test_gradient_against_central_differences(p, x):
    h = 1e-6
    x = np.array(x)
    for i, g in enumerate(gradient(p)):
        e = np.zeros(3)
        e[i] = h
        fd = (evaluate(p, x + e) - evaluate(p, x - e)) / (2 * h)
        exact = evaluate(g, x)
        assert abs(fd - exact) <= 1e-5 * max(1.0, abs(exact), sum(abs(float(c)) for c in p.terms.values()) * 50)


def test_compiled_matches_exact():
    p = parse("3*x1^3*x2 - 1/7*x2^2 + x1 - 2", 2)
    X = np.random.default_rng(1).uniform(-2, 2, size=(50, 2))
    vals = p.numeric(X)
    assert np.allclose(vals, [evaluate(p, x) for x in X], rtol=1e-13, atol=1e-13)
