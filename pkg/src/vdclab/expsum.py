"""Additive character sums over boxes and over ``X(F_q)``.

``S1(a) = sum_{b in box} e_q(-a.b)`` is evaluated from the per-axis geometric
series; ``S2(a) = sum_{x in X(F_q)} e_q(a.x)`` by direct summation, or for a
full sweep over ``a`` as an inverse FFT of the indicator of ``X(F_q)``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ff, variety
from .counting import BoxZ, as_box, count_box_mod
from .errors import HypothesisError, PreconditionError
from .ff import field
from .poly import IntPoly

FULL_SWEEP_CAP = 10**7


@dataclass(frozen=True)
class CharSum:
    value: complex
    terms: int
    q: int

    def __post_init__(self):
        if abs(self.value) > self.terms * (1 + 1e-9) + 1e-9:
            raise ArithmeticError(f"|sum| = {abs(self.value)} exceeds term count {self.terms}")

    def __abs__(self):
        return abs(self.value)


def _e(x, q):
    return np.exp(2j * np.pi * (np.asarray(x) % q) / q)


def _axis_s1(lo: int, hi: int, q: int, a: np.ndarray) -> np.ndarray:
    """``sum_{b=lo..hi} e_q(-a b)`` for each entry of ``a``, by the geometric series."""
    a = np.asarray(a, dtype=np.int64) % q
    N = hi - lo + 1
    out = np.full(a.shape, complex(max(N, 0)))
    nz = a != 0
    if N > 0 and nz.any():
        w = _e(-a[nz], q)
        out[nz] = _e(-a[nz] * lo, q) * (1 - _e(-a[nz] * N, q)) / (1 - w)
    return out


def s1(box, a: Sequence[int], q: int) -> CharSum:
    box = as_box(box, len(a))
    if max(box.sides) > q:
        raise PreconditionError("box sides must not exceed q")
    val = complex(np.prod([_axis_s1(l, h, q, np.array([ai]))[0]
                           for l, h, ai in zip(box.lo, box.hi, a)]))
    return CharSum(val, box.npoints, q)


def s1_brute(box, a: Sequence[int], q: int) -> CharSum:
    """Reference ``S1`` by summing over every box point."""
    box = as_box(box, len(a))
    pts = box.points()
    return CharSum(complex(_e(-(pts @ np.asarray(a, dtype=np.int64)), q).sum()), box.npoints, q)


def s1_table(box: BoxZ, q: int) -> np.ndarray:
    """``S1(a)`` for all ``a`` in ``F_q^n`` as an ``n``-dimensional array indexed by ``a``."""
    if max(box.sides) > q:
        raise PreconditionError("box sides must not exceed q")
    ar = np.arange(q)
    out = _axis_s1(box.lo[0], box.hi[0], q, ar)
    for l, h in zip(box.lo[1:], box.hi[1:]):
        out = np.multiply.outer(out, _axis_s1(l, h, q, ar))
    return out


def _polys(instance):
    return instance.polys if isinstance(instance, variety.Instance) else tuple(instance)


def points_mod(instance, q: int, budget: int | None = None) -> np.ndarray:
    """``X(F_q)`` as an ``(N, n)`` array, in lexicographic order."""
    polys = _polys(instance)
    return variety.zero_set(polys, field(q), mode="affine", budget=budget)


def s2(instance, a: Sequence[int], q: int, points: np.ndarray | None = None) -> CharSum:
    pts = points_mod(instance, q) if points is None else points
    if not len(pts):
        return CharSum(0j, 0, q)
    phase = pts @ (np.asarray(a, dtype=np.int64) % q)
    return CharSum(complex(_e(phase, q).sum()), len(pts), q)


def sigma_q(instance, a: Sequence[int], q: int, points: np.ndarray | None = None) -> CharSum:
    """``Sigma_q(a) = sum_{z in X_q} e_q(a.z)``; the same sum as :func:`s2`."""
    return s2(instance, a, q, points)


def s2_table(instance, q: int, points: np.ndarray | None = None) -> np.ndarray:
    """``S2(a)`` for every ``a`` in ``F_q^n`` via an inverse FFT of the indicator of ``X(F_q)``."""
    polys = _polys(instance)
    n = polys[0].n_vars
    pts = points_mod(instance, q) if points is None else points
    ind = np.zeros((q,) * n)
    if len(pts):
        ind[tuple(pts.T)] = 1.0
    return np.fft.ifftn(ind) * q**n


@dataclass
class FourierCheck:
    lhs: int
    rhs: complex
    abs_err: float
    imag: float
    sampled: bool
    terms: int

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "rhs_re": self.rhs.real, "rhs_im": self.rhs.imag,
                "abs_err": self.abs_err, "imag": self.imag, "sampled": self.sampled,
                "terms": self.terms}


def fourier_inversion_check(instance, box, q: int, cap: int = FULL_SWEEP_CAP, samples: int = 4096,
                            seed: int = 0) -> FourierCheck:
    """Compare ``N(X, B, q)`` with ``q^{-n} sum_a S1(a) S2(a)``.

    Beyond ``cap`` terms the sum over ``a`` is replaced by a uniform sample
    (flagged ``sampled``); the estimate is then statistical, not an identity.
    """
    polys = _polys(instance)
    n = polys[0].n_vars
    box = as_box(box, n)
    lhs = count_box_mod(polys, box, q)
    pts = points_mod(polys, q)
    if q**n <= cap:
        rhs = complex((s1_table(box, q) * s2_table(polys, q, pts)).sum()) / q**n
        sampled, terms = False, q**n
    else:
        rng = np.random.default_rng(seed)
        A = rng.integers(0, q, size=(samples, n))
        acc = 0j
        for a in A:
            acc += s1(box, a, q).value * s2(polys, a, q, pts).value
        rhs = acc / samples
        sampled, terms = True, samples
    return FourierCheck(lhs, rhs, abs(lhs - rhs.real), abs(rhs.imag), sampled, terms)


@dataclass
class VSubspaceCheck:
    lhs: complex
    rhs: int
    count_X: int
    count_Lambda: int
    abs_err: float
    dim_V: int

    def to_json(self) -> dict:
        return {"lhs_re": self.lhs.real, "lhs_im": self.lhs.imag, "rhs": self.rhs,
                "count_X": self.count_X, "count_Lambda": self.count_Lambda,
                "abs_err": self.abs_err, "dim_V": self.dim_V}


def v_subspace_identity(instance, linears: Sequence[IntPoly], box, q: int) -> VSubspaceCheck:
    """``q^{-(s+1)} sum_{a in V} S1(a) S2(a)`` against ``#X(F_q) N(Lambda, B, q)``.

    ``X`` is cut out by the ``f_i`` together with the affine linear ``l_j``;
    ``Lambda`` by the ``l_j`` alone; ``V`` is the span of their linear parts mod q.
    """
    polys = list(_polys(instance))
    n = polys[0].n_vars
    box = as_box(box, n)
    if max(box.sides) > q:
        raise PreconditionError("box sides must not exceed q")
    if any(l.degree != 1 for l in linears):
        raise PreconditionError("the l_j must have degree 1")
    Lmat = np.array([[l.terms.get(tuple(int(i == j) for j in range(n)), 0) for i in range(n)]
                     for l in linears], dtype=np.int64) % q
    k = len(linears)
    if ff.rank_mod(Lmat, q) != k:
        raise PreconditionError("linear parts are dependent mod q: V would be too small")
    X = polys + list(linears)
    pts = points_mod(X, q)
    total = 0j
    for c in itertools.product(range(q), repeat=k):
        a = (np.asarray(c, dtype=np.int64) @ Lmat) % q
        total += s1(box, a, q).value * s2(X, a, q, pts).value
    lhs = total / q**k
    nL = count_box_mod(list(linears), box, q)
    rhs = len(pts) * nL
    return VSubspaceCheck(lhs, rhs, len(pts), nL, abs(lhs - rhs), k)


# -- Katz-type bound ----------------------------------------------------------------

@dataclass
class KatzRow:
    a: tuple
    abs_sum: float
    delta: int
    ratio: float


@dataclass
class KatzReport:
    q: int
    rows: list
    flagged: list  # a with delta > 0

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.rows), default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "abs_sum", "delta", "ratio"])
        for r in self.rows:
            w.writerow([";".join(map(str, r.a)), f"{r.abs_sum:.9f}", r.delta, f"{r.ratio:.9f}"])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"q": self.q, "max_ratio": round(self.max_ratio, 9), "flagged": [list(a) for a in self.flagged],
                "rows": [{"a": list(r.a), "abs_sum": round(r.abs_sum, 9), "delta": r.delta,
                          "ratio": round(r.ratio, 9)} for r in self.rows]}


def sample_nonzero(q: int, n: int, count: int, seed: int = 0) -> list[tuple]:
    """``count`` distinct nonzero vectors of ``F_q^n`` (all of them if fewer exist)."""
    total = q**n - 1
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(total, size=min(count, total), replace=False)) + 1
    out = []
    for v in idx:
        digits = []
        for _ in range(n):
            digits.append(int(v % q))
            v //= q
        out.append(tuple(reversed(digits)))
    return out


KATZ_EXT_BUDGET = 2_000_000


def hyperplane_sing_dim(forms: Sequence[IntPoly], a: Sequence[int], q: int, seed: int = 0,
                        ext_budget: int | None = KATZ_EXT_BUDGET) -> int:
    """``dim Sing(Z_q cap H_a)`` with ``H_a : a.x = 0``.

    The section is rewritten in coordinates of ``H_a ~ P^{n-2}`` first: one
    coordinate fewer makes the quadratic extension affordable, and singular
    points of a hyperplane section are often defined only over ``F_{q^2}``.
    """
    sec = variety.hyperplane_section(forms, a, q)
    return variety.sing_dimension(sec, q, seed=seed, ext_budget=ext_budget)


def katz_bound_report(instance: variety.Instance, q: int, a_sample: Sequence[Sequence[int]],
                      seed: int = 0, ext_budget: int | None = KATZ_EXT_BUDGET,
                      check: bool = True) -> KatzReport:
    """Normalized sizes ``|Sigma_q(a)| / q^{(n-r+1+delta(a))/2}`` over a sample of ``a``."""
    n, r = instance.n, instance.r
    Z = instance.leading_forms
    if any(F.degree < 2 for F in Z):
        raise PreconditionError("leading forms must have degree >= 2")
    if check:
        defect = variety.nonsingular_defect(Z, q, seed=seed)
        if defect:
            raise HypothesisError(f"Z_{q} is not a nonsingular complete intersection: {defect}")
    pts = points_mod(instance, q)
    rows, flagged = [], []
    cache: dict[tuple, int] = {}
    for a in a_sample:
        a = tuple(int(c) % q for c in a)
        if not any(a):
            continue
        # H_a depends only on the projective class of a
        lead = next(c for c in a if c)
        key = tuple(c * pow(lead, -1, q) % q for c in a)
        if key not in cache:
            cache[key] = hyperplane_sing_dim(Z, key, q, seed=seed, ext_budget=ext_budget)
        d = cache[key]
        if d > 0:
            flagged.append(a)
        val = abs(sigma_q(instance, a, q, pts).value)
        rows.append(KatzRow(a, val, d, val / q ** ((n - r + 1 + d) / 2)))
    return KatzReport(q, rows, flagged)


def parseval_mass(box: BoxZ, q: int) -> float:
    """``q^{-n} sum_a |S1(a)|^2``, which equals the number of box points."""
    t = s1_table(box, q)
    return float(math.fsum((np.abs(t) ** 2).ravel().tolist()) / q**box.n)
