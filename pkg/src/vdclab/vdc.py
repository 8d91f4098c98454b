"""The mod ``pq`` decomposition and Weyl-style differencing, as a self-checking audit.

Write ``N = N(X, B, pq)`` as a sum over residue classes ``w`` mod ``p``.  Each
class contributes an inner count of points with ``f = 0 (mod q)`` whose
expected value is ``K = (2B+1)^n / (p^n q^r)``.  Cauchy's inequality and the
shift ``x' = x + p y`` turn the fluctuation into the sum of ``Delta(y)`` over
shifts ``y``.  Everything here is exact (``Fraction``); floats appear only in
the error-term report.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import variety
from .counting import BoxZ, count_box_mod, grid_eval
from .errors import DimensionAmbiguous, PreconditionError
from .ff import field
from .poly import FieldPoly, IntPoly, difference_poly, directional, gradient, leading_form
from .primes import is_prime, nearest_prime, next_prime, prev_prime


# -- prime plan -----------------------------------------------------------------------

def _den(n: int, r: int) -> int:
    return n * n + 4 * n * r - n - r * r - r


def plan_exponents(n: int, r: int) -> tuple[float, float]:
    """``(e_p, e_q)`` with ``p ~ B^{e_p}``, ``q ~ B^{e_q}`` balancing the error terms."""
    den = _den(n, r)
    return 1 - (5 * n * r - r * r - 5 * r) / den, 2 - 2 * (4 * n * r - r * r) / den


def thm1_exponent(n: int, r: int) -> float:
    return n - 3 * r + r * r * (13 * n - 5 - 3 * r) / _den(n, r)


def heath_brown_exponent(n: int) -> float:
    """Earlier hypersurface exponent ``n - 3 + 15/(n+5)``."""
    return n - 3 + 15 / (n + 5)


@dataclass
class PrimePlan:
    n: int
    r: int
    B: int
    e_p: float
    e_q: float
    p_target: float
    q_target: float
    p: int
    q: int
    relaxed: bool
    exact: bool
    B_exact: int | None = None
    checks: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["p_target"] = round(self.p_target, 9)
        d["q_target"] = round(self.q_target, 9)
        return d


def _plan_ok(B: int, p: int, q: int) -> bool:
    return 2 * p < 2 * B + 1 < q - p


def _good_prime_at_least(x: float, instance, seed: int) -> int:
    p = next_prime(math.ceil(x))
    if instance is None:
        return p
    return variety.find_good_prime(instance, p, window_factor=4.0, seed=seed)


def _good_prime_near(x: float, instance, seed: int, ceiling: int | None = None) -> int:
    """Nearest prime to ``x`` (at most ``ceiling``) with good reduction, searching outward."""
    cand = sorted({nearest_prime(x)} | {prev_prime(int(x)) or 2, next_prime(int(x))},
                  key=lambda c: (abs(c - x), c))
    tried = set()
    pool = list(cand)
    while pool:
        c = pool.pop(0)
        if c in tried or (ceiling is not None and c > ceiling) or c < 2:
            continue
        tried.add(c)
        if instance is None or variety.nonsingular_defect(instance.leading_forms, c, seed=seed) is None:
            return c
        nxt = [next_prime(c + 1)]
        if c > 2:
            nxt.append(prev_prime(c - 1))
        pool = sorted(set(pool) | {v for v in nxt if v and v not in tried}, key=lambda v: (abs(v - x), v))
        if len(tried) > 50:
            break
    raise variety.NoGoodPrimeError(f"no good prime near {x:.3f}; tried {sorted(tried)}")


def select_primes(n: int, r: int, B: int, instance: variety.Instance | None = None, relaxed: bool = False,
                  exact: bool = False, seed: int = 0) -> PrimePlan:
    """Choose ``p ~ B^{e_p}`` and ``q ~ B^{e_q}`` subject to ``2p < 2B+1 < q - p``.

    In relaxed mode the targets are clamped into the admissible range (needed
    at desk-scale ``B``, and for ``n < 4r + 2``).  With an instance, only primes
    where the leading forms stay nonsingular of codimension ``r`` are used.
    With ``exact``, ``B`` is moved to the nearest ``B'`` with ``p | 2B'+1``.
    """
    if n < 4 * r + 2 and not relaxed:
        raise PreconditionError(f"n = {n} < 4r + 2 = {4 * r + 2}: outside the regime; pass relaxed=True")
    e_p, e_q = plan_exponents(n, r)
    pt, qt = float(B) ** e_p, float(B) ** e_q
    if relaxed:
        p = _good_prime_near(min(pt, B), instance, seed, ceiling=B)
        q = _good_prime_at_least(max(qt, 2 * B + 2 + p), instance, seed)
    else:
        p = _good_prime_near(pt, instance, seed)
        q = _good_prime_near(qt, instance, seed)
    if not _plan_ok(B, p, q):
        Bmin = B + 1
        while True:
            pp, qq = nearest_prime(Bmin**e_p), nearest_prime(Bmin**e_q)
            if _plan_ok(Bmin, pp, qq):
                break
            Bmin += 1
        raise PreconditionError(f"2p < 2B+1 < q-p fails for B={B} (p={p}, q={q}); "
                                f"smallest B satisfying it with these exponents is about {Bmin}")
    plan = PrimePlan(n, r, B, e_p, e_q, pt, qt, p, q, relaxed, exact)
    plan.checks["2p<2B+1"] = 2 * p < 2 * B + 1
    plan.checks["2B+1<q-p"] = 2 * B + 1 < q - p
    if exact:
        plan.B_exact = exact_B(B, p, q)
        plan.checks["p|2B'+1"] = (2 * plan.B_exact + 1) % p == 0
    return plan


def exact_B(B: int, p: int, q: int) -> int:
    """Nearest ``B'`` to ``B`` with ``p | 2B'+1`` and ``p < 2B'+1 < q``."""
    if p == 2:
        raise PreconditionError("2B+1 is odd: p = 2 never divides it")
    cands = [(p * (2 * j + 1) - 1) // 2 for j in range(1, q)]
    cands = [b for b in cands if p < 2 * b + 1 < q]
    if not cands:
        raise PreconditionError(f"no B' with p | 2B'+1 and p < 2B'+1 < q for p={p}, q={q}")
    return min(cands, key=lambda b: (abs(b - B), b))


def bracket_B(B: int, p: int, q: int) -> tuple[int, int]:
    """``B1 <= B <= B2`` with ``p | 2B_i+1`` and ``p < 2B_i+1 < q``."""
    cands = [(p * (2 * j + 1) - 1) // 2 for j in range(1, q)]
    cands = [b for b in cands if p < 2 * b + 1 < q]
    lo = [b for b in cands if b <= B]
    hi = [b for b in cands if b >= B]
    if not lo or not hi:
        raise PreconditionError(f"cannot bracket B={B} for p={p}, q={q}")
    return max(lo), min(hi)


def error_terms(n: int, r: int, B: float, p: int, q: int) -> dict[str, float]:
    """The six error terms of the ``N(X, B, pq)`` asymptotic, with unit constants."""
    L = math.log(q) ** (n / 2)
    return {
        "T1": B ** ((n + 1) / 2) * p ** (-r / 2) * q ** ((n - r - 1) / 4) * L,
        "T2": B ** ((n + 1) / 2) * p ** ((n - 2 * r) / 2) * q ** (-1 / 4) * L,
        "T3": B ** (n / 2) * p ** (-r / 2) * q ** ((n - r) / 4) * L,
        "T4": B ** (n / 2) * p ** ((n - r) / 2) * L,
        "T5": B**n * p ** (-(n + r - 1) / 2) * q ** (-r),
        "T6": B ** (n - 1) * p ** (-r + 1) * q ** (-r),
    }


# -- differencing ----------------------------------------------------------------------

@dataclass
class DiffSystem:
    y: tuple
    polys: list            # f_i^y over Z
    forms: list            # leading forms of f_i^y reduced mod q (zero if f_i^y = 0 mod q)
    sigma: int             # codim Z_y in P^{n-1}
    s: int | None          # dim Sing Z_y when sigma = r
    law_holds: bool | None  # leading form = p (y . grad F_i) mod q, when that is nonzero


def _leading_mod(f: IntPoly, q: int) -> IntPoly:
    g = f.reduce(q)
    return g if g.is_zero() else leading_form(g)


def _form_key(forms: Sequence[IntPoly], q: int) -> tuple:
    key = []
    for F in forms:
        items = sorted(F.terms.items())
        if items:
            inv = pow(items[0][1], -1, q)
            items = [(e, c * inv % q) for e, c in items]
        key.append(tuple(items))
    return tuple(key)


def difference_system(instance: variety.Instance, p: int, y: Sequence[int], q: int, seed: int = 0,
                      ext_budget: int | None = None, cache: dict | None = None) -> DiffSystem:
    """``f_i^y(x) = f_i(x + p y) - f_i(x)``, with the stratum of ``Z_y`` computed over ``F_q``."""
    n, r = instance.n, instance.r
    y = tuple(int(t) for t in y)
    polys = [difference_poly(f, p, y) for f in instance.polys]
    forms = [_leading_mod(g, q) for g in polys]
    law = None
    grads = [directional(gradient(F), y) for F in instance.leading_forms]
    pyF = [(g * p).reduce(q) for g in grads]
    if all(not g.is_zero() for g in pyF):
        law = all(F == g for F, g in zip(forms, pyF))
    key = _form_key(forms, q)
    if cache is not None and key in cache:
        sigma, s = cache[key]
    else:
        live = [F for F in forms if not F.is_zero()]
        if any(F.degree == 0 for F in live):
            sigma, s = r, -1  # a nonzero constant cuts out the empty set
        elif not live:
            sigma, s = 0, None
        else:
            dZ = variety.dimension(live, q, n_vars=n, seed=seed, ext_budget=ext_budget)
            sigma = min(r, n - 1 - dZ)
            s = None
            if sigma == r:
                s = variety.sing_dimension(live, q, seed=seed, ext_budget=ext_budget)
        if cache is not None:
            cache[key] = (sigma, s)
    return DiffSystem(y, polys, forms, sigma, s, law)


def _box_y(B: int, n: int, p: int, y: Sequence[int]) -> BoxZ:
    box = BoxZ.symmetric(n, B)
    return box.intersect(box.translate([-p * t for t in y]))


def delta(instance, B: int, p: int, q: int, y: Sequence[int]) -> Fraction:
    """``Delta(y)``: differenced-congruence count on ``B_y`` minus ``q^{-r} #B_y``, exactly."""
    polys = instance.polys if isinstance(instance, variety.Instance) else tuple(instance)
    n, r = polys[0].n_vars, len(polys)
    By = _box_y(B, n, p, y)
    if By.is_empty():
        return Fraction(0)
    diffs = [difference_poly(f, p, y) for f in polys]
    hits = count_box_mod(diffs, By, q)
    return hits - Fraction(By.npoints, q**r)


# -- the audit ---------------------------------------------------------------------------

def _codes(polys, axes, m: int) -> np.ndarray:
    """Encode ``(f_1, ..., f_r) mod m`` on a grid as one integer per point."""
    out = np.zeros(tuple(len(a) for a in axes), dtype=np.int64)
    for i, f in enumerate(polys):
        out += grid_eval(f, axes, m) * m**i
    return out


def _shift_slices(B: int, shift: int):
    """Index slices of ``[-B, B]`` for ``x`` and ``x + shift`` both inside."""
    lo, hi = max(-B, -B - shift), min(B, B - shift)
    if lo > hi:
        return None
    return slice(lo + B, hi + B + 1), slice(lo + shift + B, hi + shift + B + 1)


def delta_fast(codes: np.ndarray, B: int, p: int, q: int, r: int, y: Sequence[int]) -> Fraction:
    """``Delta(y)`` from a precomputed code array of ``f mod q`` on ``[-B, B]^n``."""
    a_idx, b_idx = [], []
    for t in y:
        sl = _shift_slices(B, p * int(t))
        if sl is None:
            return Fraction(0)
        a_idx.append(sl[0])
        b_idx.append(sl[1])
    A = codes[tuple(a_idx)]
    hits = int(np.count_nonzero(A == codes[tuple(b_idx)]))
    return hits - Fraction(A.size, q**r)


def shift_range(B: int, p: int) -> int:
    """Largest ``t`` with ``|t| < (2B+1)/p``."""
    return -(-(2 * B + 1) // p) - 1


@dataclass
class AuditReport:
    digest: str
    n: int
    r: int
    B: int
    p: int
    q: int
    seed: int
    K: Fraction
    N: int
    N_direct: int
    count_X_Fp: int
    S: Fraction
    Sigma: Fraction
    Sigma_enlarged: Fraction
    Zsum: int
    delta_table: dict
    delta_sum: Fraction
    shell_nonzero: list
    crosscheck: dict
    identity_flags: dict
    error_terms: dict
    residual: Fraction
    strata: dict | None = None

    def to_json(self) -> dict:
        fr = lambda x: [x.numerator, x.denominator]  # noqa: E731
        terms_total = sum(self.error_terms.values())
        return {
            "inputs": {"instance": self.digest, "n": self.n, "r": self.r, "B": self.B,
                       "p": self.p, "q": self.q, "seed": self.seed},
            "K": fr(self.K), "N": self.N, "N_direct": self.N_direct, "count_X_Fp": self.count_X_Fp,
            "S": fr(self.S), "Sigma": fr(self.Sigma), "Sigma_enlarged": fr(self.Sigma_enlarged),
            "Zsum": self.Zsum, "delta_sum": fr(self.delta_sum),
            "delta_count": len(self.delta_table),
            "shell_nonzero": [list(y) for y in self.shell_nonzero],
            "crosscheck": self.crosscheck,
            "identity_flags": self.identity_flags,
            "error_terms": {k: round(v, 9) for k, v in self.error_terms.items()},
            "residual": fr(self.residual),
            "residual_over_terms": round(float(abs(self.residual)) / terms_total, 12),
            "strata": self.strata,
        }

    def delta_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"y{i + 1}" for i in range(self.n)] + ["numerator", "denominator"])
        for y, d in sorted(self.delta_table.items()):
            w.writerow(list(y) + [d.numerator, d.denominator])
        return buf.getvalue()


def _check_exact_mode(r: int, B: int, p: int, q: int) -> None:
    if r < 1:
        raise PreconditionError("need at least one equation")
    if not (is_prime(p) and is_prime(q)) or p == q:
        raise PreconditionError("p and q must be distinct primes")
    if not p < 2 * B + 1 < q:
        raise PreconditionError(f"need p < 2B+1 < q, got p={p}, 2B+1={2 * B + 1}, q={q}")
    if (2 * B + 1) % p:
        raise PreconditionError(f"exact mode needs p | 2B+1 (p={p}, 2B+1={2 * B + 1}); "
                                f"nearest valid B is {exact_B(B, p, q)}")


def audit(instance: variety.Instance, B: int, p: int, q: int, seed: int = 0, crosscheck: int = 64,
          census: bool = False, ext_budget: int | None = None) -> AuditReport:
    """Run the decomposition at ``(B, p, q)`` and check every exact step.

    Flags: (a) ``N = S + K #X(F_p)``; (b) ``Z = sum Delta(y) + p^n q^r K^2``;
    (c) ``Sigma <= sum Delta(y)``; (d) ``S^2 <= #X(F_p) Sigma``; (e) ``Delta(y) = 0``
    on the shell ``|y| >= (2B+1)/p``.  ``crosscheck`` shifts are recomputed
    through the expanded difference polynomials.
    """
    n, r = instance.n, instance.r
    _check_exact_mode(r, B, p, q)
    axis = np.arange(-B, B + 1, dtype=np.int64)
    axes = [axis] * n
    side = 2 * B + 1

    cq = _codes(instance.polys, axes, q)
    on_q = cq == 0
    # residue class of each box point mod p, and whether it lies on X(F_p)
    w_code = np.zeros((side,) * n, dtype=np.int64)
    for i in range(n):
        shape = [1] * n
        shape[i] = side
        w_code = w_code + ((axis % p) * p ** (n - 1 - i)).reshape(shape)
    wpts = np.array(list(itertools.product(range(p), repeat=n)), dtype=np.int64)
    on_p_w = np.ones(p**n, dtype=bool)
    for f in instance.polys:
        on_p_w &= FieldPoly(f, field(p)).eval_many(wpts) == 0
    count_Xp = int(on_p_w.sum())

    inner = np.bincount(w_code[on_q], minlength=p**n)
    K = Fraction(side**n, p**n * q**r)
    N = int(inner[on_p_w].sum())
    N_direct = count_box_mod(instance, BoxZ.symmetric(n, B), p * q)
    inner_X = [int(v) for v in inner[on_p_w]]
    S = sum(inner_X) - K * count_Xp
    Sigma = sum((Fraction(v) - K) ** 2 for v in inner_X)
    joint = np.bincount((w_code * q**r + cq).ravel(), minlength=p**n * q**r)
    Zsum = int((joint.astype(object) ** 2).sum())
    main_sq = p**n * q**r * K * K
    Sigma_enl = Zsum - main_sq

    R = shift_range(B, p)
    deltas = {}
    for y in itertools.product(range(-R, R + 1), repeat=n):
        deltas[y] = delta_fast(cq, B, p, q, r, y)
    dsum = sum(deltas.values(), Fraction(0))
    shell = [y for y in itertools.product(range(-R - 1, R + 2), repeat=n) if max(map(abs, y)) == R + 1]
    shell_nz = [y for y in shell if delta(instance, B, p, q, y) != 0]

    keys = sorted(deltas)
    step = max(1, len(keys) // max(crosscheck, 1))
    picks = keys[::step][:crosscheck] if crosscheck else []
    mismatches = [list(y) for y in picks if delta(instance, B, p, q, y) != deltas[y]]

    flags = {
        "a_N_eq_S_plus_K_count": N == S + K * count_Xp,
        "a_N_matches_direct_count": N == N_direct,
        "b_Z_eq_delta_sum_plus_main": Zsum == dsum + main_sq,
        "c_Sigma_le_delta_sum": Sigma <= dsum,
        "d_cauchy": S * S <= count_Xp * Sigma,
        "e_delta_vanishes_outside": not shell_nz,
        "delta_routes_agree": not mismatches,
    }
    terms = error_terms(n, r, B, p, q)
    residual = N - Fraction(side**n, p**r * q**r)
    rep = AuditReport(instance.digest(), n, r, B, p, q, seed, K, N, N_direct, count_Xp, S, Sigma,
                      Sigma_enl, Zsum, deltas, dsum, shell_nz,
                      {"checked": len(picks), "mismatches": mismatches}, flags, terms, residual)
    if census:
        rep.strata = strata_census(instance, B, p, q, seed=seed, ext_budget=ext_budget).to_json()
    return rep


def audit_general(instance: variety.Instance, B: int, p: int, q: int, **kw) -> dict:
    """Audit at the bracketing ``B1 <= B <= B2`` and check the count is squeezed between them."""
    B1, B2 = bracket_B(B, p, q)
    n = instance.n
    N = count_box_mod(instance, BoxZ.symmetric(n, B), p * q)
    a1, a2 = audit(instance, B1, p, q, **kw), audit(instance, B2, p, q, **kw)
    return {"B": B, "B1": B1, "B2": B2, "N": N, "audit_B1": a1, "audit_B2": a2,
            "bracketed": a1.N <= N <= a2.N}


# -- strata census -------------------------------------------------------------------------

@dataclass
class Census:
    B: int
    p: int
    q: int
    n: int
    r: int
    total: int
    sigma_hist: dict
    s_hist: dict
    sigma_ratio: dict
    s_ratio: dict
    by_y: dict
    law_violations: list
    ambiguous: list

    def to_json(self) -> dict:
        return {"B": self.B, "p": self.p, "q": self.q, "total": self.total,
                "sigma_hist": {str(k): v for k, v in sorted(self.sigma_hist.items())},
                "s_hist": {str(k): v for k, v in sorted(self.s_hist.items())},
                "sigma_ratio": {str(k): round(v, 9) for k, v in sorted(self.sigma_ratio.items())},
                "s_ratio": {str(k): round(v, 9) for k, v in sorted(self.s_ratio.items())},
                "law_violations": [list(y) for y in self.law_violations],
                "ambiguous": [list(y) for y in self.ambiguous]}


def strata_census(instance: variety.Instance, B: int, p: int, q: int, seed: int = 0,
                  ext_budget: int | None = None) -> Census:
    """Classify every shift ``y`` with ``|y| < (2B+1)/p`` by ``sigma(y)`` and ``s(y)``."""
    n, r = instance.n, instance.r
    R = shift_range(B, p)
    cache: dict = {}
    sig_h: dict = {}
    s_h: dict = {}
    by_y = {}
    law_bad, amb = [], []
    total = 0
    for y in itertools.product(range(-R, R + 1), repeat=n):
        total += 1
        try:
            ds = difference_system(instance, p, y, q, seed=seed, ext_budget=ext_budget, cache=cache)
        except DimensionAmbiguous:
            amb.append(y)
            continue
        if ds.law_holds is False:
            law_bad.append(y)
        sig_h[ds.sigma] = sig_h.get(ds.sigma, 0) + 1
        if ds.sigma == r:
            s_h[ds.s] = s_h.get(ds.s, 0) + 1
        by_y[y] = (ds.sigma, ds.s)
    scale = B / p
    sig_ratio = {k: v / scale**k for k, v in sig_h.items()}
    s_ratio = {k: v / scale ** (n - k - 1) for k, v in s_h.items()}
    return Census(B, p, q, n, r, total, sig_h, s_h, sig_ratio, s_ratio, by_y, law_bad, amb)
