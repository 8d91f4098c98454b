import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vdclab import variety as V
from vdclab.errors import HypothesisError, NoGoodPrimeError, PreconditionError
from vdclab.ff import field
from vdclab.poly import IntPoly, parse_poly

P = parse_poly


def test_point_counts():
    assert V.count_points([P("x1*x2 - x3*x4", 4)], field(3)) == 16
    assert V.count_points([P("x1^3 + x2^3", 2)], field(7), mode="affine") == 19
    assert V.count_points([IntPoly.zero(3)], field(5)) == 31


def test_singular_loci():
    F = [P("x1^3 + x2^3 + x3^3 + x4^3", 4)]
    assert V.singular_locus(F, field(7)).size == 0
    Z3 = V.count_points(F, field(3))
    assert V.singular_locus(F, field(3)).size == Z3 == 13
    nodal = V.singular_locus([P("x2^3 - x1*x3^2", 3)], field(5))
    assert nodal.points == frozenset({(1, 0, 0)})


def test_dimension_examples():
    assert V.dimension([P("x1^2 + x2^2 + x3^2 + x4^2", 4)], 5) == 2
    assert V.dimension([P("x1^3 + x2^3 + x3^3", 3)], 7) == 1
    assert V.dimension([IntPoly.const(3, 1)], 7) == -1
    assert V.dimension([P("x1", 3), P("x2", 3)], 5) == 0


def test_dimension_reports_counts():
    d, counts = V.dimension([P("x1*x2 - x3*x4", 4)], 3, return_counts=True)
    assert d == 2 and counts[1] == 16


def test_dimension_of_finite_set_with_rational_points():
    # two rational points plus the hyperplane-coincidence trap at small q
    pts = [P("x1*x3 - x2^2", 3), P("x2*(x2 - x1)", 3), P("x3*(x3 - x1)", 3)]
    assert V.dimension(pts, 13) == 0


def test_sing_report_and_defect():
    F = [P("x1^3 + x2^3 + x3^3 + x4^3", 4)]
    rep = V.sing_report(F, 7)
    assert rep.dim_Z == 2 and rep.dim_sing == -1 and rep.is_complete_intersection_codim
    assert V.nonsingular_defect(F, 7) is None
    assert "Sing" in V.nonsingular_defect(F, 3)


def test_strata_diagonal_cubic():
    st_ = V.strata_sets([P("x1^3 + x2^3 + x3^3 + x4^3", 4)], 7)
    assert sorted(st_.T[2]) == [(0, 0, 0, 1), (0, 0, 1, 0), (0, 1, 0, 0), (1, 0, 0, 0)]
    assert st_.fiber_sizes.get((1, 1, 1, 1), 0) == 0
    assert not st_.T.get(3)
    assert st_.dim_S <= 2


def test_strata_refuses_bad_characteristic():
    with pytest.raises(HypothesisError):
        V.strata_sets([P("x1^3 + x2^3 + x3^3", 3)], 3)


def test_good_hyperplane_chain():
    # cone over a singular plane cubic: its singular locus is the line over the singular point
    forms = [P("x2^3 - x1*x3^2", 4)]
    s = V.sing_dimension(forms, 5)
    assert s == 1
    for _ in range(s + 1):
        L = V.find_good_hyperplane(forms, 5)
        forms = V.hyperplane_section(forms, L, 5)
    assert V.sing_dimension(forms, 5) == -1
    assert V.dimension(forms, 5) == 0


def test_good_hyperplane_needs_singular_input():
    with pytest.raises(PreconditionError):
        V.find_good_hyperplane([P("x1^3 + x2^3 + x3^3 + x4^3", 4)], 7)


def test_good_prime():
    inst = V.Instance.of(P("x1^3 + x2^3 + x3^3 + x4^3", 4))
    assert V.find_good_prime(inst, 5) == 5
    assert V.find_good_prime(inst, 3) == 5
    with pytest.raises(NoGoodPrimeError):
        V.find_good_prime(V.Instance.of(P("x1^3 + x2^3", 4)), 5, window_factor=1.5)


def test_point_set_dimension():
    ctx = field(7)
    line = V.zero_set([P("x3", 3)], ctx)
    assert V.point_set_dimension(line, 7) == 1
    assert V.point_set_dimension(np.array([[1, 0, 0], [0, 1, 0]]), 7) == 0


def test_instance_json_roundtrip():
    inst = V.Instance.from_json({"n": 2, "r": 1, "polys": ["x1^3 - 2*x2 + 1"]})
    again = V.Instance.from_json(inst.to_json())
    assert again == inst and again.digest() == inst.digest()
    with pytest.raises(ValueError):
        V.Instance.from_json({"n": 2, "r": 2, "polys": ["x1"]})


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 6)] * 3), min_size=1, max_size=4), st.sampled_from([5, 7]))
def test_linear_subspaces_have_expected_dimension(rows, q):
    rows = [r for r in rows if any(c % q for c in r)]
    if not rows:
        return
    from vdclab import ff
    rank = ff.rank_mod(np.array(rows) % q, q)
    forms = [IntPoly.linear(list(r)) for r in rows]
    assert V.dimension(forms, q) == 2 - rank
