import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vdclab.ff import field
from vdclab.poly import (FieldPoly, IntPoly, PolySystem, difference_poly, directional, gradient,
                         hessian, jacobian_minors, leading_form, parse_poly, translate_scale)

P2 = lambda s: parse_poly(s, 2)  # noqa: E731


def test_leading_form_examples():
    assert leading_form(P2("x1^3 + x1*x2 + 1")) == P2("x1^3")
    assert leading_form(P2("x1^3 + x2^3 + 5*x2")) == P2("x1^3 + x2^3")
    f = P2("x1^2*x2 - 4*x2^3")
    assert leading_form(f) == f


def test_translate_scale():
    x = parse_poly("x1", 1)
    assert translate_scale(x**3, [1], 2) == parse_poly("x1^3 + 6*x1^2 + 12*x1 + 8", 1)
    f = P2("x1^2 - x2")
    assert translate_scale(f, [3, 1], 0) == f
    assert translate_scale(P2("x1 + x2"), [1, -1], 3) == P2("x1 + x2")


def test_difference_poly():
    x = parse_poly("x1", 1)
    assert difference_poly(x**3, 2, [1]) == parse_poly("6*x1^2 + 12*x1 + 8", 1)
    assert difference_poly(P2("x1^3"), 2, [0, 1]).is_zero()
    d = difference_poly(P2("3*x1 - x2 + 7"), 5, [1, 2])
    assert d.degree == 0 and d == IntPoly.const(2, 5)


def test_gradient_hessian():
    f = P2("x1^3 + x2^3")
    assert gradient(f) == [P2("3*x1^2"), P2("3*x2^2")]
    assert hessian(f) == [[P2("6*x1"), IntPoly.zero(2)], [IntPoly.zero(2), P2("6*x2")]]
    assert all(g.is_zero() for g in gradient(IntPoly.const(2, 4)))


def test_reduce_and_eval_mod():
    assert parse_poly("7*x1^2 + 3", 1).reduce(7) == IntPoly.const(1, 3)
    fp = FieldPoly(P2("x1^3 + x2^3"), field(7))
    assert fp.eval([1, 2]) == 2
    assert FieldPoly(IntPoly.zero(2), field(7)).eval([3, 4]) == 0


def test_json_roundtrip_and_format():
    f = P2("-12345678901234567890*x1^2*x2 + x2 - 1")
    obj = f.to_json()
    assert obj["n"] == 2 and all(isinstance(c, str) for _, c in obj["terms"])
    assert IntPoly.from_json(obj) == f


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_poly("x1 / x2", 2)
    with pytest.raises(ValueError):
        parse_poly("x3", 2)


def test_polysystem_leading_forms():
    S = PolySystem([P2("x1^3 + x2"), P2("x1*x2 - 1")])
    assert S.leading_forms == (P2("x1^3"), P2("x1*x2"))
    assert S.degrees == (3, 2)


def test_jacobian_minors_of_single_form_are_partials():
    f = P2("x1^3 + x2^3")
    assert sorted(map(repr, jacobian_minors([f]))) == sorted(map(repr, gradient(f)))


small_polys = st.dictionaries(
    st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2)),
    st.integers(-20, 20), max_size=6).map(lambda t: IntPoly(3, t))
points = st.tuples(*[st.integers(-5, 5)] * 3)


@settings(max_examples=60, deadline=None)
@given(small_polys, small_polys, points)
def test_ring_homomorphism(f, g, x):
    assert (f + g)(x) == f(x) + g(x)
    assert (f * g)(x) == f(x) * g(x)
    assert (f - f).is_zero()


@settings(max_examples=60, deadline=None)
@given(small_polys, points, st.integers(1, 7), points)
def test_difference_poly_matches_evaluation(f, y, p, x):
    shifted = [a + p * b for a, b in zip(x, y)]
    assert difference_poly(f, p, y)(x) == f(shifted) - f(x)


@settings(max_examples=40, deadline=None)
@given(small_polys, points)
def test_directional_is_derivative(f, y):
    # y . grad f at x is the t-coefficient of f(x + t y), expanded exactly
    x = (1, -2, 3)
    line = [IntPoly.linear([b], a) for a, b in zip(x, y)]
    g = f.compose(line)
    assert directional(gradient(f), y)(x) == g.terms.get((1,), 0)


@settings(max_examples=40, deadline=None)
@given(small_polys, st.sampled_from([2, 3, 5, 7]))
def test_fieldpoly_agrees_with_integer_eval(f, q):
    ctx = field(q)
    pts = np.array(list(itertools.product(range(q), repeat=3)), dtype=np.int64)
    got = FieldPoly(f, ctx).eval_many(pts)
    want = np.array([f(tuple(map(int, p))) % q for p in pts])
    assert (got == want).all()


def test_pickle_roundtrip():
    import pickle
    f = parse_poly("x1^3 - 2*x1*x2 + 5", 2)
    g = pickle.loads(pickle.dumps(f))
    assert g == f and hash(g) == hash(f)
