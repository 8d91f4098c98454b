import cmath
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vdclab import expsum as E
from vdclab.counting import BoxZ
from vdclab.errors import PreconditionError
from vdclab.poly import IntPoly, parse_poly
from vdclab.variety import Instance

P = parse_poly


def e(x, q):
    return cmath.exp(2j * cmath.pi * (x % q) / q)


def test_s1_examples():
    box = BoxZ((0,), (2,))
    assert E.s1(box, [1], 7).value == pytest.approx(1 + e(-1, 7) + e(-2, 7), abs=1e-12)
    b2 = BoxZ.symmetric(3, 2)
    assert E.s1(b2, [0, 0, 0], 7).value == pytest.approx(125)
    prod = np.prod([E.s1(BoxZ((-2,), (2,)), [a], 7).value for a in (1, 3, 5)])
    assert E.s1(b2, [1, 3, 5], 7).value == pytest.approx(prod, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.tuples(st.integers(-3, 0), st.integers(-3, 0)), st.tuples(st.integers(0, 3), st.integers(0, 3)),
       st.tuples(st.integers(0, 12), st.integers(0, 12)))
def test_s1_closed_form_vs_brute(lo, hi, a):
    box = BoxZ(lo, hi)
    assert abs(E.s1(box, a, 13).value - E.s1_brute(box, a, 13).value) < 1e-10


def test_s2_examples(toy):
    pts = E.points_mod(toy, 7)
    assert len(pts) == 19
    assert E.s2(toy, (0, 0), 7).value == pytest.approx(19)
    want = sum(e(x1 + x2, 7) for x1, x2 in itertools.product(range(7), repeat=2)
               if (x1**3 + x2**3) % 7 == 0)
    assert E.s2(toy, (1, 1), 7).value == pytest.approx(want, abs=1e-12)
    empty = Instance.of(IntPoly.const(2, 1))
    assert E.s2(empty, (1, 2), 7).value == 0


def test_s2_table_matches_direct(toy):
    tab = E.s2_table(toy, 7)
    for a in [(0, 0), (1, 1), (3, 5), (6, 2)]:
        assert tab[a] == pytest.approx(E.s2(toy, a, 7).value, abs=1e-9)


def test_fourier_inversion_examples(toy):
    chk = E.fourier_inversion_check(toy, BoxZ.symmetric(2, 1), 7)
    assert chk.lhs == 3 and chk.abs_err < 1e-6 and chk.imag < 1e-6 and not chk.sampled
    zero = Instance.of(IntPoly.zero(2))
    chk = E.fourier_inversion_check(zero, BoxZ.symmetric(2, 2), 5)
    assert chk.lhs == 25 and chk.abs_err < 1e-9


def test_fourier_inversion_sampled_flag(toy):
    chk = E.fourier_inversion_check(toy, BoxZ.symmetric(2, 1), 7, cap=10, samples=64)
    assert chk.sampled and chk.terms == 64


def test_v_subspace_worked_example():
    f = Instance.of(P("x1^3 - 1", 2))
    chk = E.v_subspace_identity(f, [P("x2", 2)], BoxZ((0, 0), (2, 2)), 7)
    assert chk.count_X == 3 and chk.count_Lambda == 3 and chk.rhs == 9
    assert abs(chk.lhs - 9) < 1e-9


def test_v_subspace_full_span_is_point_count():
    f = Instance.of(P("x1^2 + x2^2 - 1", 2))
    lin = [P("x1 - 1", 2), P("x2", 2)]
    chk = E.v_subspace_identity(f, lin, BoxZ((0, 0), (4, 4)), 5)
    assert chk.dim_V == 2 and abs(chk.lhs - chk.rhs) < 1e-9


def test_v_subspace_rejects_dependent_forms():
    with pytest.raises(PreconditionError):
        E.v_subspace_identity(Instance.of(P("x1^3", 2)), [P("x1", 2), P("3*x1 + 7*x2", 2)],
                              BoxZ((0, 0), (2, 2)), 7)


def test_parseval():
    box = BoxZ((-1, 0), (2, 3))
    assert E.parseval_mass(box, 7) == pytest.approx(box.npoints)


def test_katz_rows(fermat4):
    rep = E.katz_bound_report(fermat4, 7, [(1, 0, 0, 0), (0, 0, 0, 0), (1, 1, 0, 0)])
    assert len(rep.rows) == 2  # a = 0 is excluded
    r0 = rep.rows[0]
    assert r0.delta in (-1, 0) and np.isfinite(r0.ratio)
    assert r0.abs_sum == pytest.approx(35.0)
    assert rep.to_csv().splitlines()[0] == "a,abs_sum,delta,ratio"


def test_katz_delta_matches_brute_force(fermat4):
    # singular points of Z cap H_a over F_{q^2}, counted by brute force in P^3
    from vdclab import variety as V
    from vdclab.ff import field
    q = 7
    for a in E.sample_nonzero(q, 4, 6, seed=3):
        d = E.hyperplane_sing_dim(fermat4.leading_forms, a, q)
        forms = list(fermat4.leading_forms) + [IntPoly.linear(list(a))]
        sing = V.singular_locus(forms, field(q, 2))
        assert (d >= 0) == (sing.size > 0)


def test_sample_nonzero_is_deterministic():
    a = E.sample_nonzero(7, 3, 10, seed=5)
    assert a == E.sample_nonzero(7, 3, 10, seed=5)
    assert len(set(a)) == 10 and (0, 0, 0) not in a
