import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vdclab import vdc
from vdclab.counting import BoxZ, count_box_mod
from vdclab.errors import PreconditionError
from vdclab.poly import IntPoly, parse_poly
from vdclab.variety import Instance

P = parse_poly


def brute_delta(inst, B, p, q, y):
    n, r = inst.n, inst.r
    box = [range(max(-B, -B - p * t), min(B, B - p * t) + 1) for t in y]
    pts = list(itertools.product(*box))
    hit = sum(all((f([a + p * t for a, t in zip(x, y)]) - f(x)) % q == 0 for f in inst.polys) for x in pts)
    return hit - Fraction(len(pts), q**r)


def test_plan_exponents_closed_form():
    e_p, e_q = vdc.plan_exponents(10, 1)
    assert e_p == pytest.approx(0.65625, abs=1e-12) and e_q == pytest.approx(1.390625, abs=1e-12)
    assert vdc.thm1_exponent(10, 1) == pytest.approx(7.953125, abs=1e-12)
    assert vdc.heath_brown_exponent(10) == pytest.approx(8.0)


def test_select_primes_regime():
    with pytest.raises(PreconditionError):
        vdc.select_primes(5, 1, 100)
    plan = vdc.select_primes(5, 1, 50, relaxed=True)
    assert 2 * plan.p < 2 * 50 + 1 < plan.q - plan.p


def test_select_primes_relaxed_with_instance(toy):
    inst = Instance.of(P("x1^3 + x2^3 + x3^3 + x1 - 2", 3))
    plan = vdc.select_primes(3, 1, 7, instance=inst, relaxed=True)
    assert plan.checks["2p<2B+1"] and plan.checks["2B+1<q-p"]


def test_exact_B():
    B = vdc.exact_B(5, 3, 31)
    assert (2 * B + 1) % 3 == 0 and abs(B - 5) <= 1
    lo, hi = vdc.bracket_B(5, 3, 31)
    assert lo <= 5 <= hi


def test_difference_system_law(fermat4):
    ds = vdc.difference_system(fermat4, 2, (1, 0, 0, 0), 7)
    assert ds.forms[0] == P("6*x1^2", 4).reduce(7)
    assert ds.law_holds and ds.sigma == 1
    zero = vdc.difference_system(fermat4, 2, (0, 0, 0, 0), 7)
    assert zero.sigma == 0


def test_delta_examples(toy):
    B, p, q = 4, 3, 11
    assert vdc.delta(toy, B, p, q, (0, 0)) == Fraction(810, 11)
    assert vdc.delta(toy, B, p, q, (1, 0)) == brute_delta(toy, B, p, q, (1, 0)) == Fraction(-54, 11)
    assert vdc.delta(toy, B, p, q, (3, 0)) == 0


@settings(max_examples=25, deadline=None)
@given(st.tuples(st.integers(-2, 2), st.integers(-2, 2)))
def test_delta_fast_matches_brute(y):
    inst = Instance.of(P("x1^2*x2 - x2^3 + x1 + 1", 2))
    B, p, q = 4, 3, 11
    axes = [np.arange(-B, B + 1)] * 2
    codes = vdc._codes(inst.polys, axes, q)
    assert vdc.delta_fast(codes, B, p, q, 1, y) == brute_delta(inst, B, p, q, y)


def test_audit_toy(toy):
    a = vdc.audit(toy, 4, 3, 11)
    assert a.K == Fraction(9, 11) and a.count_X_Fp == 3 and a.N == 9
    assert a.S == Fraction(72, 11) and a.Sigma == Fraction(1728, 121)
    assert a.delta_sum == Fraction(712, 11) and a.Zsum == 131
    assert all(a.identity_flags.values())
    js = a.to_json()
    assert js["K"] == [9, 11] and js["identity_flags"]["e_delta_vanishes_outside"]
    assert a.delta_csv().splitlines()[0] == "y1,y2,numerator,denominator"


def test_audit_contract(toy):
    with pytest.raises(PreconditionError):
        vdc.audit(toy, 5, 3, 11)  # 3 does not divide 11
    with pytest.raises(PreconditionError):
        vdc._check_exact_mode(0, 4, 3, 11)  # no equations


@settings(max_examples=10, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), st.integers(-4, 4), min_size=1,
                       max_size=5))
def test_audit_identities_hold_on_random_polys(terms):
    f = IntPoly(2, terms)
    if f.degree < 1:
        return
    a = vdc.audit(Instance.of(f), 4, 3, 13, crosscheck=8)
    assert all(a.identity_flags.values()), a.identity_flags
    assert a.N == count_box_mod([f], BoxZ.symmetric(2, 4), 39)


def test_strata_census(fermat4):
    c = vdc.strata_census(Instance.of(P("x1^3 + x2^3", 2)), 4, 3, 11)
    js = c.to_json()
    assert sum(js["sigma_hist"].values()) == 25
