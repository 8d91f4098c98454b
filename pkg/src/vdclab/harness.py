"""Instance generation, exponent fits and config-driven experiment runs.

A run reads one JSON config, executes a mode over its sweep points and writes
``report.json`` (deterministic: no timings, floats rounded to 1e-9), one CSV
per sweep table, ``summary.txt`` and ``timings.json``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, counting, expsum, ff, variety, vdc
from .counting import BoxZ
from .errors import PreconditionError, SearchExhausted
from .poly import IntPoly, difference_poly, directional, gradient, monomials
from .primes import next_prime, primes_in

SCHEMA = 1
MODES = ("count", "ffpoints", "singdim", "expsum", "vsubspace", "audit", "select-primes",
         "hooley-sweep", "katz-sweep", "thm2-sweep", "weighted", "difference-law", "strata")


class ConfigError(ValueError):
    """The experiment config is malformed; raised before any work starts."""


class SweepPointError(RuntimeError):
    def __init__(self, mode: str, point, cause: BaseException):
        self.mode, self.point = mode, point
        super().__init__(f"{mode}: sweep point {point} failed: {type(cause).__name__}: {cause}")


# -- instances ---------------------------------------------------------------------

def _random_poly(rng: np.random.Generator, n: int, d: int, H: int, homogeneous: bool) -> IntPoly:
    degs = [d] if homogeneous else range(d + 1)
    while True:
        terms = {}
        for k in degs:
            for e in monomials(n, k):
                c = int(rng.integers(-H, H + 1))
                if c:
                    terms[tuple(e)] = c
        f = IntPoly(n, terms)
        if f.degree == d:
            return f


def _diagonal(rng: np.random.Generator, n: int, d: int, H: int) -> IntPoly:
    cs = [int(c) for c in rng.integers(1, H + 1, size=n) * rng.choice([-1, 1], size=n)]
    return IntPoly(n, {tuple(d * int(i == j) for j in range(n)): c for i, c in enumerate(cs)})


def _lower_terms(rng: np.random.Generator, n: int, d: int, H: int) -> IntPoly:
    terms = {}
    for k in range(d):
        for e in monomials(n, k):
            c = int(rng.integers(-H, H + 1))
            if c:
                terms[tuple(e)] = c
    return IntPoly(n, terms)


def test_primes(max_degree: int, count: int = 3) -> list[int]:
    """The ``count`` smallest primes above ``max_degree``."""
    out, p = [], max_degree
    while len(out) < count:
        p = next_prime(p + 1)
        out.append(p)
    return out


test_primes.__test__ = False  # not a pytest test


def generate_instance(n: int, r: int, degrees, H: int = 3, seed: int = 0, *, diagonal: bool = False,
                      lower: bool = False, leading: Sequence[str] | None = None, min_degree: int = 3,
                      check: bool = True, max_rejections: int = 100) -> variety.Instance:
    """Random system of ``r`` polynomials in ``n`` variables, coefficients in ``[-H, H]``.

    With ``check`` the leading forms must be nonsingular of codimension ``r``
    modulo each of the three smallest primes above the largest degree; a
    candidate failing any of them is redrawn.  ``diagonal`` asks for
    ``sum_j c_j x_j^d``; ``leading`` fixes the top forms as strings.  Either
    gets random lower-degree terms when ``lower``.
    """
    if not 1 <= r < n:
        raise PreconditionError(f"need 1 <= r < n, got r={r}, n={n}")
    degs = [int(degrees)] * r if np.isscalar(degrees) else [int(d) for d in degrees]
    if len(degs) != r:
        raise PreconditionError(f"{len(degs)} degrees given for r={r}")
    if min(degs) < min_degree:
        raise PreconditionError(f"degrees must be >= {min_degree}, got {degs}")
    if H < 1:
        raise PreconditionError("coefficient height must be positive")
    tops = None
    if leading is not None:
        tops = [variety.parse_poly(t, n) if isinstance(t, str) else t for t in leading]
        if len(tops) != r or any(not t.is_homogeneous() or t.degree != d for t, d in zip(tops, degs)):
            raise PreconditionError("leading forms must be homogeneous of the stated degrees")
    rng = np.random.default_rng(seed)
    primes = test_primes(max(degs))
    for _ in range(max_rejections):
        polys = []
        for d in degs:
            if tops is not None or diagonal:
                f = tops[len(polys)] if tops is not None else _diagonal(rng, n, d, H)
                if lower:
                    f = f + _lower_terms(rng, n, d, H)
            else:
                f = _random_poly(rng, n, d, H, homogeneous=False)
            polys.append(f)
        inst = variety.Instance.of(*polys)
        if not check:
            return inst
        if all(variety.nonsingular_defect(inst.leading_forms, p, seed=seed) is None for p in primes):
            return inst
    raise SearchExhausted(f"{max_rejections} consecutive rejections at primes {primes}; "
                          "raise H or change the degrees")


# -- fits ------------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    points: tuple

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "points": [list(p) for p in self.points]}


def fit_exponent(xs, ys=None) -> FitResult:
    """Least-squares line through ``(log x, log y)``.

    Accepts two sequences or one sequence of ``(x, y)`` pairs.  Points with
    ``y <= 0`` are dropped with a warning.
    """
    pts = list(zip(xs, ys)) if ys is not None else [tuple(p) for p in xs]
    x = [float(a) for a, _ in pts]
    if any(b <= a for a, b in zip(x, x[1:])):
        raise PreconditionError("x must be strictly increasing")
    keep = [(float(a), float(b)) for a, b in pts if b > 0]
    if len(keep) < len(pts):
        warnings.warn(f"dropped {len(pts) - len(keep)} point(s) with y <= 0", RuntimeWarning, stacklevel=2)
    if len(keep) < 3:
        raise PreconditionError(f"need at least 3 points with y > 0, have {len(keep)}")
    lx = np.log([a for a, _ in keep])
    ly = np.log([b for _, b in keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot <= 1e-24 else max(0.0, min(1.0, 1 - float((resid**2).sum()) / ss_tot))
    return FitResult(float(slope), float(intercept), r2, tuple(keep))


# -- config ----------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    mode: str
    seed: int | None = None
    instance: dict | None = None
    B: list | None = None
    q: list | None = None
    p: list | None = None
    budget: int | None = None
    workers: int = 1
    out: str | None = None
    params: dict = dc_field(default_factory=dict)
    description: str = ""
    base_dir: str = "."

    FIELDS = ("mode", "seed", "instance", "B", "q", "p", "budget", "workers", "out", "params",
              "description")

    @classmethod
    def from_dict(cls, obj: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(obj) - set(cls.FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "mode" not in obj:
            raise ConfigError("config needs a mode")
        cfg = cls(**{k: obj[k] for k in cls.FIELDS if k in obj}, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(obj, base_dir=path.parent)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        for name in ("B", "q", "p"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, list) or not v):
                raise ConfigError(f"{name} must be a nonempty list")
        if self.seed is not None and not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if isinstance(self.instance, dict) and "generate" in self.instance:
            if "seed" not in self.instance["generate"] and self.seed is None:
                raise ConfigError("generator instances need a seed")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be an object")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        for name in _REQUIRED.get(self.mode, ()):
            if name == "instance":
                if self.instance is None:
                    raise ConfigError(f"mode {self.mode} needs an instance")
            elif getattr(self, name) is None:
                raise ConfigError(f"mode {self.mode} needs {name}")

    def to_json(self) -> dict:
        """Canonical form: everything that can change results, nothing about output paths."""
        d = {k: getattr(self, k) for k in self.FIELDS if k not in ("out", "workers")}
        return d

    def digest(self) -> str:
        blob = json.dumps(canonical(self.to_json()), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def seed_value(self) -> int:
        return 0 if self.seed is None else self.seed


_REQUIRED = {
    "count": ("instance", "B"), "ffpoints": ("instance", "q"), "singdim": ("instance", "q"),
    "hooley-sweep": ("instance", "q"), "katz-sweep": ("instance", "q"), "thm2-sweep": ("B",),
    "weighted": ("instance", "B", "q"), "strata": ("instance", "q"),
}


def load_instance(spec, base_dir: str | Path = ".", seed: int = 0) -> variety.Instance:
    """An instance from ``{"file": path}``, inline JSON, or ``{"generate": {...}}``."""
    if isinstance(spec, variety.Instance):
        return spec
    if not isinstance(spec, dict):
        raise ConfigError("instance must be an object")
    if "file" in spec:
        return variety.Instance.from_json(json.loads((Path(base_dir) / spec["file"]).read_text()))
    if "generate" in spec:
        g = dict(spec["generate"])
        g.setdefault("seed", seed)
        try:
            return generate_instance(**g)
        except TypeError as exc:
            raise ConfigError(f"bad generator parameters: {exc}") from exc
    return variety.Instance.from_json(spec)


# -- serialization -----------------------------------------------------------------------

def canonical(obj):
    """JSON-ready copy with floats cut to 15 significant digits and exact values kept exact."""
    if hasattr(obj, "to_json") and not isinstance(obj, type):
        return canonical(obj.to_json())
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return [obj.numerator, obj.denominator]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        x = float(f"{x:.15g}")
        return 0.0 if x == 0 else x
    if isinstance(obj, complex):
        return [canonical(obj.real), canonical(obj.imag)]
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else ",".join(map(str, k)): canonical(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [canonical(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=1) + "\n"


def _csv(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    v = canonical(v)
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    if isinstance(v, list):
        return ";".join(str(x) for x in v)
    return "" if v is None else v


# -- sweep plumbing ---------------------------------------------------------------------

def _timed(fn, arg):
    t0 = time.perf_counter()
    out = fn(arg)
    return out, time.perf_counter() - t0


def _call(job):
    mode, fn, key, arg = job
    try:
        return _timed(fn, arg)
    except Exception as exc:  # identify the failing point, keep the cause chained
        raise SweepPointError(mode, key, exc) from exc


def sweep(mode: str, fn: Callable, points: Sequence[tuple[Any, Any]], workers: int = 1):
    """Apply ``fn`` to every ``(key, arg)``; results come back sorted by key."""
    jobs = [(mode, fn, key, arg) for key, arg in points]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_call, jobs))
    else:
        outs = [_call(j) for j in jobs]
    order = sorted(range(len(jobs)), key=lambda i: _sort_key(jobs[i][2]))
    return [(jobs[i][2], outs[i][0], outs[i][1]) for i in order]


def _sort_key(key):
    items = key if isinstance(key, tuple) else (key,)
    return tuple((0, v, "") if isinstance(v, (int, float)) else (1, 0, str(v)) for v in items)


@dataclass
class ModeResult:
    results: dict
    tables: dict = dc_field(default_factory=dict)  # name -> (columns, rows)
    summary: list = dc_field(default_factory=list)
    timings: dict = dc_field(default_factory=dict)
    files: dict = dc_field(default_factory=dict)  # extra verbatim outputs


def _record(res: ModeResult, name: str, swept) -> list:
    rows = []
    for key, row, secs in swept:
        res.timings[f"{name}:{','.join(map(str, key)) if isinstance(key, tuple) else key}"] = secs
        rows.append(row)
    return rows


# -- modes ------------------------------------------------------------------------------

def _box(n: int, B: int) -> BoxZ:
    return BoxZ.symmetric(n, int(B))


def _pt_count(arg):
    inst, B, q = arg
    box = _box(inst.n, B)
    N = counting.count_box(inst, box) if q is None else counting.count_box_mod(inst, box, q)
    dim = inst.n - inst.r
    return {"B": B, "q": q, "count": N, "ratio": N / B**dim if B else None}


def mode_count(cfg, inst):
    qs = cfg.q or [None]
    pts = [((B, q or 0), (inst, B, q)) for B in cfg.B for q in qs]
    res = ModeResult({})
    rows = _record(res, "count", sweep("count", _pt_count, pts, cfg.workers))
    bound = cfg.params.get("bound_constant")
    if bound is None and inst.r == 1 and cfg.q is not None:
        # a nonzero degree-d polynomial has at most d (2B+1)^(n-1) zeros mod q
        # in a box with sides <= q, so N / B^(n-1) <= d (2 + 1/B)^(n-1)
        bound = inst.degrees[0] * (2 + 1 / min(cfg.B)) ** (inst.n - 1)
    max_ratio = max(r["ratio"] for r in rows)
    res.results = {"rows": rows, "dim_X": inst.n - inst.r, "bound_constant": bound,
                   "max_ratio": max_ratio,
                   "below_bound": None if bound is None else all(r["ratio"] <= bound for r in rows)}
    res.tables["count"] = (["B", "q", "count", "ratio"], rows)
    res.summary.append(f"max N/B^dim = {max_ratio:.6g}; recorded constant {bound}")
    return res


def _pt_ffpoints(arg):
    inst, q = arg
    ctx = ff.field(q)
    return {"q": q, "affine": variety.count_points(inst.polys, ctx, mode="affine"),
            "projective_Z": variety.count_points(inst.leading_forms, ctx)}


def mode_ffpoints(cfg, inst):
    res = ModeResult({})
    rows = _record(res, "ffpoints", sweep("ffpoints", _pt_ffpoints, [(q, (inst, q)) for q in cfg.q],
                                          cfg.workers))
    res.results = {"rows": rows}
    res.tables["ffpoints"] = (["q", "affine", "projective_Z"], rows)
    res.summary += [f"q={r['q']}: #X(F_q)={r['affine']} #Z(F_q)={r['projective_Z']}" for r in rows]
    return res


def _pt_singdim(arg):
    inst, q, seed = arg
    rep = variety.sing_report(list(inst.leading_forms), q, seed=seed)
    return {"q": q, "dim_Z": rep.dim_Z, "dim_sing": rep.dim_sing,
            "complete_intersection": rep.is_complete_intersection_codim,
            "counts": {str(k): v for k, v in sorted(rep.point_counts.items())}}


def mode_singdim(cfg, inst):
    res = ModeResult({})
    pts = [(q, (inst, q, cfg.seed_value)) for q in cfg.q]
    rows = _record(res, "singdim", sweep("singdim", _pt_singdim, pts, cfg.workers))
    res.results = {"rows": rows}
    res.tables["singdim"] = (["q", "dim_Z", "dim_sing", "complete_intersection"], rows)
    res.summary += [f"q={r['q']}: dim Z={r['dim_Z']} dim Sing={r['dim_sing']}" for r in rows]
    return res


def _expsum_case(rng: np.random.Generator, p: dict):
    n = int(rng.choice(p.get("n", [1, 2, 3])))
    qs = [q for q in primes_in(p.get("q_min", 2), p.get("q_max", 31))]
    q = int(rng.choice(qs))
    r = int(rng.integers(1, min(p.get("r_max", 2), n) + 1))
    polys = [_random_poly(rng, n, int(rng.integers(1, p.get("degree_max", 3) + 1)), p.get("H", 5), False)
             for _ in range(r)]
    bm = p.get("box_max", 3)
    lo, hi = [], []
    for _ in range(n):
        a, b = sorted(int(v) for v in rng.integers(-bm, bm + 1, size=2))
        b = min(b, a + q - 1)
        lo.append(a)
        hi.append(b)
    return variety.Instance.of(*polys), BoxZ(tuple(lo), tuple(hi)), q


def _pt_expsum(arg):
    inst, box, q, seed = arg
    chk = expsum.fourier_inversion_check(inst, box, q, seed=seed)
    return {"instance": inst.digest(), "n": inst.n, "r": inst.r, "q": q, "box": box.to_json(),
            "lhs": chk.lhs, "rhs_re": chk.rhs.real, "rhs_im": chk.rhs.imag, "abs_err": chk.abs_err,
            "sampled": chk.sampled}


def mode_expsum(cfg, inst):
    p = cfg.params
    pts = []
    if "suite" in p:
        rng = np.random.default_rng(cfg.seed_value)
        for i in range(int(p["suite"].get("count", 100))):
            case_inst, box, q = _expsum_case(rng, p["suite"])
            pts.append((i, (case_inst, box, q, cfg.seed_value)))
    else:
        if inst is None or cfg.q is None:
            raise ConfigError("expsum needs an instance and q (or params.suite)")
        boxes = [counting.BoxZ.from_json(b) for b in p["boxes"]] if "boxes" in p else \
            [_box(inst.n, B) for B in (cfg.B or [1])]
        pts = [(i, (inst, b, q, cfg.seed_value))
               for i, (b, q) in enumerate(itertools.product(boxes, cfg.q))]
    res = ModeResult({})
    rows = _record(res, "expsum", sweep("expsum", _pt_expsum, pts, cfg.workers))
    max_err = max(r["abs_err"] for r in rows)
    max_im = max(abs(r["rhs_im"]) for r in rows)
    res.results = {"rows": rows, "cases": len(rows), "max_abs_err": max_err, "max_abs_imag": max_im}
    res.tables["expsum"] = (["instance", "n", "r", "q", "box", "lhs", "rhs_re", "rhs_im", "abs_err",
                             "sampled"], rows)
    res.summary.append(f"{len(rows)} cases: max |N - rhs| = {max_err:.3e}, max |Im| = {max_im:.3e}")
    return res


def _vsub_case(rng: np.random.Generator, p: dict):
    q = int(rng.choice(p.get("q", [5, 7, 11])))
    n = int(rng.choice(p.get("n", [2, 3])))
    k = int(rng.choice(p.get("k", [1, 2])))
    k = min(k, n)
    f = _random_poly(rng, n, int(rng.choice(p.get("degrees", [2, 3]))), p.get("H", 3), False)
    while True:
        A = rng.integers(-3, 4, size=(k, n))
        if ff.rank_mod(A % q, q) == k:
            break
    linears = [IntPoly.linear([int(c) for c in row], int(rng.integers(-3, 4))) for row in A]
    bm = p.get("box_max", 3)
    lo = [int(v) for v in rng.integers(-bm, 1, size=n)]
    hi = [min(l + q - 1, int(v)) for l, v in zip(lo, rng.integers(0, bm + 1, size=n))]
    return variety.Instance.of(f), linears, BoxZ(tuple(lo), tuple(hi)), q


def _pt_vsub(arg):
    inst, linears, box, q = arg
    chk = expsum.v_subspace_identity(inst, linears, box, q)
    return {"instance": inst.digest(), "linears": [repr(l) for l in linears], "q": q,
            "box": box.to_json(), "lhs_re": chk.lhs.real, "lhs_im": chk.lhs.imag, "rhs": chk.rhs,
            "abs_err": chk.abs_err, "dim_V": chk.dim_V}


def mode_vsubspace(cfg, inst):
    p = cfg.params
    pts = []
    for i, case in enumerate(p.get("cases", [])):
        ci = load_instance(case["instance"], cfg.base_dir)
        lin = [variety.parse_poly(s, ci.n) if isinstance(s, str) else IntPoly.from_json(s)
               for s in case["linears"]]
        pts.append((("case", i), (ci, lin, BoxZ.from_json(case["box"]), int(case["q"]))))
    if "random" in p:
        rng = np.random.default_rng(cfg.seed_value)
        for i in range(int(p["random"].get("count", 20))):
            pts.append((("random", i), _vsub_case(rng, p["random"])))
    if not pts:
        raise ConfigError("vsubspace needs params.cases or params.random")
    res = ModeResult({})
    rows = _record(res, "vsubspace", sweep("vsubspace", _pt_vsub, pts, cfg.workers))
    max_err = max(r["abs_err"] for r in rows)
    res.results = {"rows": rows, "cases": len(rows), "max_abs_err": max_err}
    res.tables["vsubspace"] = (["instance", "q", "box", "dim_V", "lhs_re", "lhs_im", "rhs", "abs_err"], rows)
    res.summary.append(f"{len(rows)} cases: max |lhs - rhs| = {max_err:.3e}")
    return res


def _audit_cases(rng: np.random.Generator, p: dict):
    while True:
        n = int(rng.choice(p.get("n", [2, 3])))
        pp = int(rng.choice(p.get("p", [3, 5])))
        q = int(rng.choice(p.get("q", [11, 13, 17])))
        Bs = [B for B in range(1, p.get("B_max", 10) + 1) if (2 * B + 1) % pp == 0 and pp < 2 * B + 1 < q]
        if Bs:
            break
    B = int(rng.choice(Bs))
    r = int(rng.choice(p.get("r", [1])))
    polys = [_random_poly(rng, n, int(rng.choice(p.get("degrees", [2, 3]))), p.get("H", 3), False)
             for _ in range(r)]
    return variety.Instance.of(*polys), B, pp, q


def _pt_audit(arg):
    inst, B, p, q, seed, census = arg
    return vdc.audit(inst, B, p, q, seed=seed, census=census)


def mode_audit(cfg, inst):
    p = cfg.params
    census = bool(p.get("census", False))
    if "suite" in p:
        rng = np.random.default_rng(cfg.seed_value)
        pts = []
        for i in range(int(p["suite"].get("count", 50))):
            ci, B, pp, q = _audit_cases(rng, p["suite"])
            pts.append((i, (ci, B, pp, q, cfg.seed_value, census)))
    else:
        if inst is None or not (cfg.B and cfg.p and cfg.q):
            raise ConfigError("audit needs an instance with B, p, q lists (or params.suite)")
        pts = [(i, (inst, B, pp, q, cfg.seed_value, census))
               for i, (B, pp, q) in enumerate(itertools.product(cfg.B, cfg.p, cfg.q))]
    res = ModeResult({})
    reps = _record(res, "audit", sweep("audit", _pt_audit, pts, cfg.workers))
    rows = [{"instance": a.digest, "n": a.n, "r": a.r, "B": a.B, "p": a.p, "q": a.q,
             "flags": a.identity_flags, "all_flags": all(a.identity_flags.values()),
             "report": a.to_json()} for a in reps]
    flag_names = sorted(rows[0]["flags"])
    totals = {k: sum(bool(r["flags"][k]) for r in rows) for k in flag_names}
    res.results = {"cases": len(rows), "flag_totals": totals,
                   "all_true": all(r["all_flags"] for r in rows), "rows": rows}
    flat = [dict(r, **r["flags"]) for r in rows]
    res.tables["audit"] = (["instance", "n", "r", "B", "p", "q"] + flag_names, flat)
    if len(reps) == 1:
        res.files["delta.csv"] = reps[0].delta_csv()
    res.summary.append(f"{len(rows)} audits; flags true: " + ", ".join(f"{k}={v}" for k, v in totals.items()))
    return res


def mode_select_primes(cfg, inst):
    p = cfg.params
    rows = []
    pairs = [tuple(x) for x in p.get("pairs", [])]
    for n, r in pairs:
        e_p, e_q = vdc.plan_exponents(n, r)
        rows.append({"n": n, "r": r, "e_p": e_p, "e_q": e_q, "exponent": vdc.thm1_exponent(n, r),
                     "heath_brown": vdc.heath_brown_exponent(n) if r == 1 else None})
    plans = []
    if cfg.B:
        n, r = (inst.n, inst.r) if inst is not None else pairs[0]
        for B in cfg.B:
            plan = vdc.select_primes(n, r, int(B), instance=inst, relaxed=bool(p.get("relaxed", False)),
                                     exact=bool(p.get("exact", False)), seed=cfg.seed_value)
            plans.append(plan.to_json())
    if not rows and not plans:
        raise ConfigError("select-primes needs params.pairs or B")
    res = ModeResult({"exponents": rows, "plans": plans})
    res.tables["exponents"] = (["n", "r", "e_p", "e_q", "exponent", "heath_brown"], rows)
    if plans:
        res.tables["plans"] = (["B", "p", "q", "p_target", "q_target", "relaxed", "B_exact"], plans)
    res.summary += [f"(n,r)=({r['n']},{r['r']}): e_p={r['e_p']:.9f} e_q={r['e_q']:.9f} "
                    f"exponent={r['exponent']:.9f}" for r in rows]
    res.summary += [f"B={pl['B']}: p={pl['p']} q={pl['q']}" for pl in plans]
    return res


def _pt_hooley(arg):
    inst, q, seed = arg
    return counting.hooley_deligne_residual(inst, q, seed=seed).to_json()


def mode_hooley(cfg, inst):
    res = ModeResult({})
    pts = [(q, (inst, q, cfg.seed_value)) for q in cfg.q]
    rows = _record(res, "hooley", sweep("hooley-sweep", _pt_hooley, pts, cfg.workers))
    fit = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            fit = fit_exponent([r["q"] for r in rows], [abs(r["residual"]) for r in rows])
        except PreconditionError as exc:
            res.summary.append(f"no fit: {exc}")
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    res.results = {"rows": rows, "fit": fit, "max_ratio": max(ratios) if ratios else None,
                   "fit_warnings": [str(w.message) for w in caught]}
    res.tables["hooley"] = (["q", "count", "main", "residual", "bound", "ratio"], rows)
    if fit:
        res.summary.append(f"residual exponent {fit.slope:.4f} (r2 {fit.r2:.4f})")
    res.summary.append(f"max |residual|/bound = {res.results['max_ratio']}")
    return res


def _pt_katz(arg):
    inst, q, samples, seed = arg
    rep = expsum.katz_bound_report(inst, q, expsum.sample_nonzero(q, inst.n, samples, seed), seed=seed)
    return rep


def mode_katz(cfg, inst):
    samples = int(cfg.params.get("samples", 50))
    res = ModeResult({})
    pts = [(q, (inst, q, samples, cfg.seed_value)) for q in cfg.q]
    reps = _record(res, "katz", sweep("katz-sweep", _pt_katz, pts, cfg.workers))
    rows = [{"q": r.q, "max_ratio": r.max_ratio, "flagged": len(r.flagged), "samples": len(r.rows),
             "rms_ratio": math.sqrt(math.fsum(x.ratio**2 for x in r.rows) / len(r.rows))} for r in reps]
    qs = [r["q"] for r in rows]
    mx = [r["max_ratio"] for r in rows]
    fit = fit_exponent(qs, mx)
    lin = float(np.polyfit(qs, mx, 1)[0])
    res.results = {"rows": rows, "fit": fit, "slope": fit.slope, "linear_slope": lin,
                   "finite": all(math.isfinite(x) for x in mx), "reports": reps}
    res.tables["katz"] = (["q", "max_ratio", "rms_ratio", "flagged", "samples"], rows)
    for rep in reps:
        res.tables[f"katz_q{rep.q}"] = (["a", "abs_sum", "delta", "ratio"],
                                        [{"a": list(x.a), "abs_sum": x.abs_sum, "delta": x.delta,
                                          "ratio": x.ratio} for x in rep.rows])
    res.summary.append("max ratios " + ", ".join(f"q={q}: {m:.4f}" for q, m in zip(qs, mx)))
    res.summary.append(f"log-log slope {fit.slope:.4f}; linear slope {lin:.5f}")
    return res


def _pt_thm2(arg):
    inst, B, seed, relaxed = arg
    plan = vdc.select_primes(inst.n, inst.r, B, instance=inst, relaxed=relaxed, seed=seed)
    p, q = plan.p, plan.q
    N = counting.count_box_mod(inst, _box(inst.n, B), p * q)
    main = Fraction((2 * B + 1) ** inst.n, (p * q) ** inst.r)
    terms = vdc.error_terms(inst.n, inst.r, B, p, q)
    total = math.fsum(terms.values())
    resid = abs(N - main)
    return {"B": B, "p": p, "q": q, "N": N, "main": main, "residual": resid,
            "terms": terms, "terms_total": total, "ratio": float(resid) / total}


def mode_thm2(cfg, inst):
    p = cfg.params
    relaxed = bool(p.get("relaxed", True))
    if "instance_seeds" in p:
        gen = dict(cfg.instance["generate"])
        insts = []
        for s in p["instance_seeds"]:
            g = dict(gen, seed=int(s))
            insts.append((int(s), generate_instance(**g)))
    else:
        if inst is None:
            raise ConfigError("thm2-sweep needs an instance or params.instance_seeds")
        insts = [(cfg.seed_value, inst)]
    pts = [((s, int(B)), (ci, int(B), cfg.seed_value, relaxed)) for s, ci in insts for B in cfg.B]
    res = ModeResult({})
    swept = sweep("thm2-sweep", _pt_thm2, pts, cfg.workers)
    rows = []
    for (s, _), row, _secs in swept:
        rows.append(dict(row, instance_seed=s))
    _record(res, "thm2", swept)
    Bs = sorted({r["B"] for r in rows})
    C_by_B = {B: max(r["ratio"] for r in rows if r["B"] == B) for B in Bs}
    C_vals = [C_by_B[B] for B in Bs]
    C = max(C_vals)
    res.results = {"rows": rows, "instances": {str(s): ci.to_json() for s, ci in insts},
                   "C_by_B": {str(B): c for B, c in C_by_B.items()}, "C": C,
                   "finite": all(math.isfinite(c) for c in C_vals),
                   "non_increasing": all(b <= a for a, b in zip(C_vals, C_vals[1:])),
                   "below": all(float(r["residual"]) <= C * r["terms_total"] for r in rows)}
    res.tables["thm2"] = (["instance_seed", "B", "p", "q", "N", "main", "residual", "terms_total", "ratio"],
                          rows)
    res.summary.append("C(B) = " + ", ".join(f"{B}: {c:.6f}" for B, c in C_by_B.items()))
    res.summary.append(f"C = {C:.6f}; non-increasing: {res.results['non_increasing']}")
    return res


def _pt_weighted(arg):
    inst, weight, B, q, seed, factor = arg
    out = counting.weighted_residual(inst, weight, B, q, seed=seed, b_max_factor=factor).to_json()
    return dict(out, B=B, q=q)


def mode_weighted(cfg, inst):
    p = cfg.params
    weight = counting.weight_from_json(p.get("weight", {"kind": "bump", "L": 0.5, "eps": 1.0}))
    factor = float(p.get("b_max_factor", 1.0))
    pts = [((B, q), (inst, weight, B, q, cfg.seed_value, factor)) for B in cfg.B for q in cfg.q]
    res = ModeResult({})
    rows = _record(res, "weighted", sweep("weighted", _pt_weighted, pts, cfg.workers))
    res.results = {"weight": weight.to_json(), "rows": rows}
    res.tables["weighted"] = (["B", "q", "lhs", "rhs_main", "residual", "s", "paper_error_term", "ratio"],
                              rows)
    res.summary += [f"B={r['B']} q={r['q']}: residual {r['residual']:.6g}, ratio {r['ratio']}" for r in rows]
    return res


def _diff_case(rng: np.random.Generator, p: dict):
    n = int(rng.integers(p.get("n_min", 2), p.get("n_max", 4) + 1))
    d = int(rng.choice(p.get("degrees", [3, 4])))
    F = _random_poly(rng, n, d, p.get("H", 5), homogeneous=True)
    pp = int(rng.choice(p.get("p", [2, 3, 5, 7, 11])))
    y = tuple(int(v) for v in rng.integers(-3, 4, size=n))
    return F, pp, y


def check_difference_law(F: IntPoly, p: int, y: Sequence[int]) -> bool:
    """Degree ``d-1`` part of ``F(x + p y) - F(x)`` against ``p (y . grad F)``, exactly."""
    d = F.degree
    top = difference_poly(F, p, y).homogeneous_part(d - 1)
    return top == directional(gradient(F), y) * p


def mode_difference_law(cfg, inst):
    p = cfg.params
    rng = np.random.default_rng(cfg.seed_value)
    rows, t0 = [], time.perf_counter()
    for i in range(int(p.get("count", 200))):
        F, pp, y = _diff_case(rng, p)
        rows.append({"case": i, "n": F.n_vars, "degree": F.degree, "p": pp, "y": list(y),
                     "holds": check_difference_law(F, pp, y)})
    res = ModeResult({"cases": len(rows), "failures": [r["case"] for r in rows if not r["holds"]],
                      "all_hold": all(r["holds"] for r in rows)},
                     timings={"difference-law": time.perf_counter() - t0})
    res.tables["difference_law"] = (["case", "n", "degree", "p", "y", "holds"], rows)
    res.summary.append(f"{len(rows)} triples, {len(res.results['failures'])} failures")
    return res


def _pt_strata(arg):
    inst, q, seed = arg
    st = variety.strata_sets(list(inst.leading_forms), q, seed=seed)
    n = inst.n
    T = {str(s): [list(y) for y in ys] for s, ys in sorted(st.T.items())}
    dim_T = {str(s): d for s, d in sorted(st.dim_T.items())}
    ok_T = all(d <= n - int(s) - 2 for s, d in st.dim_T.items())
    return {"q": q, "T": T, "T_sizes": {s: len(v) for s, v in T.items()}, "dim_T": dim_T,
            "dim_S": st.dim_S, "S_size": len(st.pairs), "S_ratio": st.S_ratio,
            "dim_S_ok": st.dim_S <= n - 2, "dim_T_ok": ok_T}


def mode_strata(cfg, inst):
    res = ModeResult({})
    pts = [(q, (inst, q, cfg.seed_value)) for q in cfg.q]
    rows = _record(res, "strata", sweep("strata", _pt_strata, pts, cfg.workers))
    res.results = {"rows": rows}
    res.tables["strata"] = (["q", "dim_S", "S_size", "dim_S_ok", "dim_T_ok"], rows)
    for r in rows:
        res.summary.append(f"q={r['q']}: dim S={r['dim_S']}, T sizes {r['T_sizes']}, dim T {r['dim_T']}")
    return res


_MODES: dict[str, Callable] = {
    "count": mode_count, "ffpoints": mode_ffpoints, "singdim": mode_singdim, "expsum": mode_expsum,
    "vsubspace": mode_vsubspace, "audit": mode_audit, "select-primes": mode_select_primes,
    "hooley-sweep": mode_hooley, "katz-sweep": mode_katz, "thm2-sweep": mode_thm2,
    "weighted": mode_weighted, "difference-law": mode_difference_law, "strata": mode_strata,
}


# -- run -----------------------------------------------------------------------------------

@dataclass
class RunOutput:
    report: dict
    files: dict
    timings: dict


def execute(cfg: ExperimentConfig) -> tuple[dict, ModeResult]:
    """Run a validated config; returns the JSON report and the raw mode result."""
    t0 = time.perf_counter()
    inst = None
    if cfg.instance is not None and not (cfg.mode == "thm2-sweep" and "instance_seeds" in cfg.params):
        inst = load_instance(cfg.instance, cfg.base_dir, cfg.seed_value)
    t_inst = time.perf_counter() - t0
    ctx = ff.budget(cfg.budget) if cfg.budget else _nullctx()
    with ctx:
        res = _MODES[cfg.mode](cfg, inst)
    res.timings = {"instance": t_inst, **res.timings, "total": time.perf_counter() - t0}
    report = {
        "schema": SCHEMA, "mode": cfg.mode, "version": __version__, "seed": cfg.seed_value,
        "config_digest": cfg.digest(), "config": cfg.to_json(),
        "instance": None if inst is None else {"digest": inst.digest(), **inst.to_json()},
        "results": res.results, "summary": res.summary,
    }
    return canonical(report), res


class _nullctx:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def run(config, out: str | Path | None = None) -> RunOutput:
    """Execute a config (object, dict or path) and write its report files."""
    if isinstance(config, (str, Path)):
        cfg = ExperimentConfig.from_file(config)
    elif isinstance(config, dict):
        cfg = ExperimentConfig.from_dict(config)
    else:
        cfg = config
        cfg.validate()
    report, res = execute(cfg)
    files = {"report.json": dumps(report)}
    for name, (cols, rows) in res.tables.items():
        files[f"{name}.csv"] = _csv(cols, rows)
    files.update(res.files)
    lines = [f"mode {cfg.mode}  seed {cfg.seed_value}  config {cfg.digest()}  version {__version__}"]
    if cfg.description:
        lines.append(cfg.description)
    lines += res.summary
    lines += [f"time {k}: {v:.3f} s" for k, v in res.timings.items()]
    files["summary.txt"] = "\n".join(lines) + "\n"
    timings = {k: round(v, 6) for k, v in res.timings.items()}
    files["timings.json"] = json.dumps(timings, indent=1) + "\n"
    target = out or cfg.out
    if target is not None:
        d = Path(target)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (d / name).write_text(text)
    return RunOutput(report, files, timings)
