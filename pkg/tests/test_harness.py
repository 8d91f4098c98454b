import json
import math
import warnings
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from vdclab import harness as Hn
from vdclab.errors import PreconditionError, SearchExhausted
from vdclab.poly import parse_poly
from vdclab.variety import Instance, nonsingular_defect

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_generate_instance_is_deterministic():
    a = Hn.generate_instance(3, 1, [3], H=3, seed=11)
    b = Hn.generate_instance(3, 1, [3], H=3, seed=11)
    assert a == b and a.digest() == b.digest()
    assert a != Hn.generate_instance(3, 1, [3], H=3, seed=12)


def test_generate_instance_passes_its_own_check():
    inst = Hn.generate_instance(4, 1, 3, H=2, seed=0)
    for p in Hn.test_primes(3):
        assert nonsingular_defect(inst.leading_forms, p) is None


def test_generate_diagonal():
    inst = Hn.generate_instance(4, 1, [3], H=4, seed=2, diagonal=True)
    f = inst.polys[0]
    assert f.is_homogeneous() and len(f.terms) == 4
    assert all(sum(e) == 3 and max(e) == 3 and c != 0 for e, c in f.terms.items())


def test_generate_with_fixed_leading_form():
    inst = Hn.generate_instance(3, 1, [3], seed=5, leading=["x1^3 + x2^3 + x3^3"], lower=True)
    assert inst.leading_forms[0] == parse_poly("x1^3 + x2^3 + x3^3", 3)


def test_generate_contract_errors():
    with pytest.raises(PreconditionError):
        Hn.generate_instance(3, 3, [3, 3, 3])
    with pytest.raises(PreconditionError):
        Hn.generate_instance(3, 1, [2])
    Hn.generate_instance(3, 1, [2], min_degree=2, seed=1)
    with pytest.raises(SearchExhausted):
        # x1^3 + x2^3 in A^3 has a singular leading form at every prime
        Hn.generate_instance(3, 1, [3], seed=0, leading=["x1^3 + x2^3"], max_rejections=3)


def test_fit_exponent_examples():
    f = Hn.fit_exponent([1, 2, 3, 4, 5], [1, 4, 9, 16, 25])
    assert f.slope == pytest.approx(2.0) and f.r2 == pytest.approx(1.0)
    assert Hn.fit_exponent([(2, 5), (3, 5), (7, 5)]).slope == pytest.approx(0.0, abs=1e-12)
    with pytest.warns(RuntimeWarning):
        f = Hn.fit_exponent([1, 2, 3, 4], [1, 0, 9, 16])
    assert len(f.points) == 3
    with pytest.raises(PreconditionError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            Hn.fit_exponent([1, 2, 3], [1, -1, 2])
    with pytest.raises(PreconditionError):
        Hn.fit_exponent([1, 3, 2], [1, 2, 3])


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 10), st.lists(st.floats(1.0, 1000.0), min_size=3, max_size=8,
                                                       unique=True))
def test_fit_recovers_power_laws(k, c, xs):
    xs = sorted(xs)
    if xs[-1] / xs[0] < 1.5:
        return
    f = Hn.fit_exponent(xs, [c * x**k for x in xs])
    assert f.slope == pytest.approx(k, abs=1e-6)
    assert 0.0 <= f.r2 <= 1.0


def test_config_validation():
    with pytest.raises(Hn.ConfigError):
        Hn.ExperimentConfig.from_dict({"mode": "bogus"})
    with pytest.raises(Hn.ConfigError):
        Hn.ExperimentConfig.from_dict({"mode": "count", "instance": {"n": 1, "r": 1, "polys": ["x1"]},
                                       "B": []})
    with pytest.raises(Hn.ConfigError):
        Hn.ExperimentConfig.from_dict({"mode": "count", "colour": 1})
    with pytest.raises(Hn.ConfigError):
        Hn.ExperimentConfig.from_dict({"mode": "hooley-sweep", "q": [5],
                                       "instance": {"generate": {"n": 3, "r": 1, "degrees": [3]}}})
    with pytest.raises(Hn.ConfigError):
        Hn.ExperimentConfig.from_dict({"mode": "hooley-sweep", "q": [5]})


def test_unknown_mode_fails_before_work(tmp_path):
    with pytest.raises(Hn.ConfigError):
        Hn.run({"mode": "nope", "out": str(tmp_path)})
    assert not any(tmp_path.iterdir())


def test_run_audit_toy(tmp_path):
    out = Hn.run(CONFIGS / "toy_audit.json", out=tmp_path)
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["schema"] == 1 and rep["seed"] == 0 and rep["version"]
    assert rep["results"]["all_true"]
    assert all(rep["results"]["rows"][0]["flags"].values())
    assert (tmp_path / "delta.csv").read_text().startswith("y1,y2,numerator,denominator")
    assert "total" in json.loads((tmp_path / "timings.json").read_text())
    assert "time" not in (tmp_path / "report.json").read_text()
    assert out.report == rep


def test_run_hooley_csv_columns(tmp_path):
    cfg = {"mode": "hooley-sweep", "seed": 0, "q": [5, 7, 13],
           "instance": {"n": 4, "r": 1, "polys": ["x1^3 + x2^3 + x3^3 + x4^3"]}}
    out = Hn.run(cfg, out=tmp_path)
    lines = (tmp_path / "hooley.csv").read_text().splitlines()
    assert lines[0] == "q,count,main,residual,bound,ratio"
    assert lines[2].startswith("7,595,343,252,")
    # the q=5 residual is exactly zero and is dropped from the fit with a warning
    assert out.report["results"]["fit_warnings"]


def test_sweep_errors_name_the_point():
    cfg = {"mode": "hooley-sweep", "seed": 0, "q": [3, 7],
           "instance": {"n": 4, "r": 1, "polys": ["x1^3 + x2^3 + x3^3 + x4^3"]}}
    with pytest.raises(Hn.SweepPointError, match="sweep point 3"):
        Hn.run(cfg)


def test_sweep_sorted_numerically():
    out = Hn.sweep("t", lambda x: x * 2, [(16, 16), (2, 2), (4, 4)])
    assert [k for k, _, _ in out] == [2, 4, 16]


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = {"mode": "ffpoints", "seed": 0, "q": [3, 5, 7], "instance": {"n": 2, "r": 1, "polys": ["x1^2 + x2^3 - 1"]}}
    a = Hn.run(cfg)
    b = Hn.run(dict(cfg, workers=2))
    assert a.files["report.json"] == b.files["report.json"]


def test_canonical_rounding_and_exact_values():
    from fractions import Fraction
    obj = {"x": 0.1 + 0.2, "f": Fraction(3, 4), "z": complex(1, -0.0), "t": (1, 2), "neg0": -0.0,
           "inf": math.inf}
    c = Hn.canonical(obj)
    assert c == {"x": 0.3, "f": [3, 4], "z": [1.0, 0.0], "t": [1, 2], "neg0": 0.0, "inf": "inf"}


def test_every_config_validates():
    names = sorted(p.name for p in CONFIGS.glob("*.json"))
    assert len(names) >= 11
    for p in CONFIGS.glob("*.json"):
        Hn.ExperimentConfig.from_file(p)


@pytest.mark.parametrize("mode,extra", [
    ("count", {"B": [1, 2], "q": [7]}),
    ("singdim", {"q": [5]}),
    ("weighted", {"B": [2], "q": [13], "params": {"weight": {"kind": "bump", "L": 0.5, "eps": 1.0}}}),
    ("expsum", {"B": [1], "q": [7]}),
])
def test_small_modes_run(mode, extra):
    cfg = {"mode": mode, "seed": 0, "instance": {"n": 3, "r": 1, "polys": ["x1^3 + x2^3 + x3^3"]}, **extra}
    out = Hn.run(cfg)
    assert out.report["mode"] == mode and out.report["results"]
