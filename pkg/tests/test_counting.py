import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vdclab import counting as C, vdc
from vdclab.counting import BoxZ
from vdclab.errors import HypothesisError, PreconditionError
from vdclab.poly import IntPoly, parse_poly
from vdclab.variety import Instance

P = parse_poly


def brute(polys, box, m=None):
    tot = 0
    for x in itertools.product(*[range(l, h + 1) for l, h in zip(box.lo, box.hi)]):
        vals = [f(x) for f in polys]
        tot += all((v % m == 0) if m else v == 0 for v in vals)
    return tot


def test_box_json_and_geometry():
    b = BoxZ.symmetric(2, 3)
    assert b.npoints == 49 and b.to_json() == {"center": [0, 0], "half": [3, 3]}
    e = BoxZ((0, 0), (1, 2))
    assert e.to_json() == {"lo": [0, 0], "hi": [1, 2]}
    assert BoxZ.from_json(e.to_json()) == e and BoxZ.from_json(b.to_json()) == b
    assert b.intersect(BoxZ((2, -5), (9, 0))) == BoxZ((2, -3), (3, 0))


def test_count_box_examples():
    assert C.count_box([P("x1 + x2", 2)], BoxZ.symmetric(2, 2)) == 5
    assert C.count_box([P("x1^3 + x2^3 + x3^3 + x4^3", 4)], BoxZ.symmetric(4, 1)) == 19
    assert C.count_box([P("x1", 2), P("x1 - 1", 2)], BoxZ.symmetric(2, 3)) == 0
    assert C.count_box_mod([P("x1^3 + x2^3", 2)], BoxZ.symmetric(2, 1), 7) == 3
    assert C.count_box_mod([IntPoly.zero(3)], BoxZ.symmetric(3, 2), 7) == 125


def test_count_box_mod_side_guard():
    with pytest.raises(PreconditionError):
        C.count_box_mod([P("x1", 1)], BoxZ.symmetric(1, 4), 7)


small = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), st.integers(-6, 6),
                        max_size=5).map(lambda t: IntPoly(2, t))


@settings(max_examples=40, deadline=None)
@given(small, st.integers(0, 3), st.sampled_from([7, 11, 13]))
def test_counts_match_brute_force(f, B, q):
    box = BoxZ.symmetric(2, B)
    n_int = C.count_box([f], box)
    n_mod = C.count_box_mod([f], box, q)
    assert n_int == brute([f], box)
    assert n_mod == brute([f], box, q)
    assert n_int <= n_mod


def test_hooley_examples(fermat4):
    r = C.hooley_deligne_residual(fermat4, 7)
    assert r.main == 343 and r.count == 595 and r.residual == 252
    assert abs(r.residual) <= 6 * 49
    with pytest.raises(HypothesisError):
        C.hooley_deligne_residual(fermat4, 3)
    pts = Instance.of(P("x1^2 - 2", 2), P("x2^2 - 3", 2))
    assert C.hooley_deligne_residual(pts, 7).skipped


def test_bump_weight_shape_and_derivatives():
    w = C.BumpWeight(0.5, 1.0)
    t = np.linspace(-0.6, 0.6, 13)
    v = w(t)
    assert (v >= 0).all() and v[0] == 0 and v[-1] == 0 and w(0.0) == pytest.approx(math.exp(-1))
    # derivative maxima against finite differences on a fine grid
    u = np.linspace(-0.999, 0.999, 20001)
    d1 = np.abs(np.gradient(w.phi(u), u)).max()
    assert w.derivative_max(1) == pytest.approx(d1, rel=1e-3)
    assert w.support_radius(6) == 2
    assert C.weight_from_json(w.to_json()).to_json() == w.to_json()


def test_weighted_examples():
    w = C.BumpWeight(0.5, 1.0)
    with pytest.raises(PreconditionError):
        C.weighted_count([P("x1", 2)], w, 0.5, 13)
    inst = Instance.of(P("x1^3 + x2^3 + x3^3", 3))
    res = C.weighted_residual(inst, w, 3, 13)
    # both sides by direct summation
    R = w.support_radius(3)
    grid = range(-R, R + 1)
    lhs = sum(float(np.prod(w(np.array(x) / 3))) for x in itertools.product(grid, repeat=3)
              if sum(c**3 for c in x) % 13 == 0)
    full = sum(float(np.prod(w(np.array(x) / 3))) for x in itertools.product(grid, repeat=3))
    assert res.lhs == pytest.approx(lhs, rel=1e-12)
    assert res.rhs_main == pytest.approx(full / 13, rel=1e-12)
    assert res.s == -1 and res.paper_error_term > 0


def test_weighted_delta_routes(toy):
    w = C.BumpWeight(0.5, 1.0)
    B, p, q = 4, 3, 11
    zero = C.weighted_delta(toy, w, B, p, q, (0, 0))
    R = w.support_radius(2 * B)
    tot = sum(float(np.prod(w(np.array(x) / (2 * B)) ** 2))
              for x in itertools.product(range(-R, R + 1), repeat=2))
    assert zero == pytest.approx((1 - 1 / q) * tot, rel=1e-12)
    assert C.weighted_delta(toy, w, B, p, q, (20, 0)) == 0.0
    ind = C.IndicatorWeight()
    for y in [(1, 0), (0, -1), (1, 1), (2, -1)]:
        assert C.weighted_delta(toy, ind, B, p, q, y) == pytest.approx(float(vdc.delta(toy, B, p, q, y)),
                                                                        abs=1e-9)


def test_D_table_limits():
    w = C.BumpWeight(0.5, 1.0)
    assert w.D_table(5) is None
    tab = w.D_table(2)
    assert set(tab) >= {0, 1, 2, 3, 4} and all(v > 0 for v in tab.values())
