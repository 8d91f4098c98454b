"""Geometry over finite fields by exhaustive enumeration.

Dimensions are measured, never assumed: :func:`dimension` combines the growth
of ``#Z(F_{q^k})`` in ``k`` with a random linear-slicing test and refuses to
answer when the two disagree.  Singular loci come from the Jacobian criterion
(maximal minors of the Jacobian, computed exactly over the integers).
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from . import ff
from .errors import (DimensionAmbiguous, HypothesisError, NoGoodPrimeError, PreconditionError,
                     SearchExhausted)
from .ff import FieldCtx, field, projective_size
from .poly import (FieldPoly, IntPoly, PolySystem, gradient, hessian, jacobian_minors, monomials,
                   parse_poly)
from .primes import primes_in

# Point budget for the extension-field sweeps behind dimension estimates.
DIM_BUDGET = 250_000
MAX_EXT_DEGREE = 6


@dataclass(frozen=True)
class Instance:
    """An affine system ``f_1 = ... = f_r = 0`` in ``A^n`` over the integers."""

    system: PolySystem

    @classmethod
    def of(cls, *polys: IntPoly) -> "Instance":
        return cls(PolySystem(polys))

    @property
    def n(self) -> int:
        return self.system.n_vars

    @property
    def r(self) -> int:
        return len(self.system)

    @property
    def polys(self) -> tuple[IntPoly, ...]:
        return self.system.polys

    @property
    def leading_forms(self) -> tuple[IntPoly, ...]:
        return self.system.leading_forms

    @property
    def degrees(self) -> tuple[int, ...]:
        return self.system.degrees

    def to_json(self) -> dict:
        return {"n": self.n, "r": self.r, "polys": [p.to_json() for p in self.polys]}

    @classmethod
    def from_json(cls, obj) -> "Instance":
        polys = [parse_poly(p, int(obj["n"])) if isinstance(p, str) else IntPoly.from_json(p)
                 for p in obj["polys"]]
        inst = cls(PolySystem(polys))
        if int(obj.get("n", inst.n)) != inst.n or int(obj.get("r", inst.r)) != inst.r:
            raise ValueError("instance header disagrees with its polynomials")
        return inst

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def __repr__(self):
        return f"Instance(n={self.n}, {list(self.polys)!r})"


@dataclass
class SingReport:
    q: int
    is_complete_intersection_codim: bool
    dim_Z: int
    dim_sing: int
    point_counts: dict = dc_field(default_factory=dict)
    k_list: list = dc_field(default_factory=list)
    seed: int = 0

    def to_json(self) -> dict:
        return {"q": self.q,
                "is_complete_intersection_codim": self.is_complete_intersection_codim,
                "dim_Z": self.dim_Z, "dim_sing": self.dim_sing,
                "point_counts": {str(k): v for k, v in sorted(self.point_counts.items())},
                "k_list": list(self.k_list), "seed": self.seed}


def _compile(forms, ctx: FieldCtx) -> list[FieldPoly]:
    out = []
    for f in forms:
        if isinstance(f, FieldPoly):
            f = f.source
        out.append(FieldPoly(f, ctx))
    return out


def zero_mask(fps: Sequence[FieldPoly], pts: np.ndarray) -> np.ndarray:
    mask = np.ones(len(pts), dtype=bool)
    for fp in fps:
        if fp.is_zero():
            continue
        mask &= _eval_where(fp, pts, mask) == 0
    return mask


def _eval_where(fp: FieldPoly, pts: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.ones(len(pts), dtype=np.int64)
    if mask.any():
        out[mask] = fp.eval_many(pts[mask])
    return out


def _chunks(ctx: FieldCtx, m: int, mode: str, budget=None):
    if mode == "projective":
        return ff.projective_chunks(ctx, m, budget=budget)
    if mode == "affine":
        return ff.affine_chunks(ctx, m, budget=budget)
    raise ValueError(f"unknown mode {mode!r}")


def count_points(forms: Sequence[IntPoly], ctx: FieldCtx, mode: str = "projective",
                 n_vars: int | None = None, workers: int = 1, budget: int | None = None) -> int:
    """Number of common zeros in ``A^m(F_{q^k})`` or ``P^{m-1}(F_{q^k})``."""
    m = n_vars if n_vars is not None else forms[0].n_vars
    fps = _compile(forms, ctx)
    return ff.reduce_chunks(_chunks(ctx, m, mode, budget),
                            lambda pts: int(zero_mask(fps, pts).sum()), workers)


def zero_set(forms: Sequence[IntPoly], ctx: FieldCtx, mode: str = "projective",
             n_vars: int | None = None, budget: int | None = None) -> np.ndarray:
    m = n_vars if n_vars is not None else forms[0].n_vars
    fps = _compile(forms, ctx)
    parts = [pts[zero_mask(fps, pts)] for pts in _chunks(ctx, m, mode, budget)]
    return np.concatenate(parts) if parts else np.zeros((0, m), dtype=np.int64)


@dataclass
class SingularLocus:
    points: frozenset
    size: int
    ctx: FieldCtx


def singular_locus(forms: Sequence[IntPoly], ctx: FieldCtx, budget: int | None = None) -> SingularLocus:
    """Points of ``Z(F_{q^k})`` where the ``r x n`` Jacobian has rank ``< r``.

    Only meaningful as ``Sing Z`` once the caller knows ``codim Z = r``.
    """
    m = forms[0].n_vars
    fps = _compile(forms, ctx)
    jac = [[FieldPoly(g, ctx) for g in gradient(f)] for f in forms]
    found = []
    for pts in ff.projective_chunks(ctx, m, budget=budget):
        on = pts[zero_mask(fps, pts)]
        if not len(on):
            continue
        rows = [[g.eval_many(on) for g in row] for row in jac]
        bad = ff.rank_below(ctx, rows)
        found.extend(tuple(int(v) for v in p) for p in on[bad])
    return SingularLocus(frozenset(found), len(found), ctx)


def singular_equations(forms: Sequence[IntPoly]) -> list[IntPoly]:
    return list(forms) + jacobian_minors(forms)


# -- dimension ----------------------------------------------------------------

def _affordable(q: int, m: int, ext_budget: int) -> list[int]:
    ks = [1]
    for k in range(2, MAX_EXT_DEGREE + 1):
        if q**k > ff.MAX_FIELD_ORDER:
            break
        if ((q**k) ** m - 1) // (q**k - 1) > ext_budget:
            break
        ks.append(k)
    return ks


def _reduced(forms, q) -> list[IntPoly]:
    return [f.reduce(q) for f in forms]


# For the emptiness test, hyperplanes are drawn over the smallest F_{q^k} with
# at least this many elements: over F_q a random hyperplane meets a finite set
# of N points with probability about N/q, which swamps the majority vote.  The
# nonemptiness test keeps F_q hyperplanes so that every extension degree up to
# MAX_EXT_DEGREE stays visible.
SLICE_FIELD_MIN = 64


def _slice_degree(q: int, mm: int, ext_budget: int, wide: bool) -> int:
    if not wide:
        return 1
    k = 1
    while q**k < SLICE_FIELD_MIN and q ** (k + 1) <= ff.MAX_FIELD_ORDER:
        k += 1
    while k > 1 and ((q**k) ** mm - 1) // (q**k - 1) > ext_budget:
        k -= 1
    return k


def _random_slice_nonempty(forms, q, m, codim, rng, ext_budget, wide=False) -> bool:
    """Is the zero set cut by ``codim`` random hyperplanes over ``F_{q^k0}`` nonempty?

    ``k0 = 1`` unless ``wide``.

    The slice ``{x = t V}`` with ``V`` a kernel basis is enumerated over
    ``F_{q^K}`` for every affordable multiple ``K`` of ``k0`` up to
    ``max(k0, MAX_EXT_DEGREE)``.
    """
    mm = m - codim
    if mm <= 0:
        return False
    k0 = _slice_degree(q, mm, ext_budget, wide)
    c0 = field(q, k0)
    while True:
        A = rng.integers(0, c0.order, size=(codim, m))
        if len(ff.rref_field(c0, A)[1]) == codim:
            break
    V = ff.kernel_field(c0, A)
    # a one-point slice is the same point over every extension
    top = k0 if mm == 1 else max(k0, MAX_EXT_DEGREE)
    for K in range(k0, top + 1, k0):
        if q**K > ff.MAX_FIELD_ORDER or ((q**K) ** mm - 1) // (q**K - 1) > ext_budget:
            break
        ctx = field(q, K)
        VK = ff.embedding(q, k0, K)[V]
        fps = _compile(forms, ctx)
        for T in ff.projective_chunks(ctx, mm):
            X = np.zeros((len(T), m), dtype=np.int64)
            for j in range(mm):
                X = ctx.add(X, ctx.mul(T[:, j:j + 1], VK[j][None, :]))
            if zero_mask(fps, X).any():
                return True
    return False


def _rng_for(forms, seed: int) -> np.random.Generator:
    # decorrelate the slices drawn for different systems under one seed
    h = hashlib.sha256(repr(sorted(sorted(f.terms.items()) for f in forms)).encode()).digest()
    return np.random.default_rng([seed, int.from_bytes(h[:8], "little")])


def dimension(forms: Sequence[IntPoly], q: int, *, n_vars: int | None = None, seed: int = 0,
              trials: int = 5, ext_budget: int | None = None, return_counts: bool = False):
    """Dimension of the projective zero set of ``forms`` over ``F_q``-bar, by measurement.

    Growth estimator: with ``c_k = #Z(F_{q^k})`` for every affordable ``k``,
    ``D = round(log(c_K / c_{K-1}) / log q)`` (or ``log c_K / (K log q)`` when
    only one extension is affordable).  Slicing estimator: ``D`` random
    hyperplanes leave a nonempty set and ``D + 1`` leave an empty
    one, each by majority over ``trials``.  Disagreement raises
    :class:`DimensionAmbiguous`.  Returns -1 for the empty set.
    """
    m = n_vars if n_vars is not None else forms[0].n_vars
    ext_budget = DIM_BUDGET if ext_budget is None else ext_budget
    forms = _reduced(forms, q)
    ks = _affordable(q, m, ext_budget)
    counts = {k: count_points(forms, field(q, k), n_vars=m) for k in ks}
    if all(c == 0 for c in counts.values()):
        D = -1
    else:
        # points over F_{q^j} need not be points over F_{q^k} for j < k unless j | k,
        # so use the largest k that sees anything
        K = max(k for k in ks if counts[k] > 0)
        if K >= 2 and counts[K - 1] > 0:
            est = math.log(counts[K] / counts[K - 1]) / math.log(q)
        else:
            est = math.log(counts[K]) / (K * math.log(q))
        D = min(max(int(round(est)), 0), m - 1)
        rng = _rng_for(forms, seed)
        hit = miss = 0
        for _ in range(trials):
            if D > 0:
                hit += _random_slice_nonempty(forms, q, m, D, rng, ext_budget)
            else:
                hit += 1
            if D + 1 <= m - 1:
                miss += not _random_slice_nonempty(forms, q, m, D + 1, rng, ext_budget, wide=True)
            else:
                miss += 1
        need = trials // 2 + 1
        if hit < need or miss < need:
            raise DimensionAmbiguous(
                f"dimension ambiguous, increase k or q (growth says {D}; slicing: "
                f"{hit}/{trials} nonempty at codim {D}, {miss}/{trials} empty at codim {D + 1})")
    if return_counts:
        return D, counts
    return D


def sing_dimension(forms: Sequence[IntPoly], q: int, **kw) -> int:
    """``dim Sing Z`` via the Jacobian criterion (valid for complete intersections)."""
    return dimension(singular_equations(forms), q, n_vars=forms[0].n_vars, **kw)


def sing_report(forms: Sequence[IntPoly], q: int, seed: int = 0, ext_budget: int | None = None) -> SingReport:
    m = forms[0].n_vars
    r = len(forms)
    dZ, counts = dimension(forms, q, seed=seed, ext_budget=ext_budget, return_counts=True)
    ds = sing_dimension(forms, q, seed=seed, ext_budget=ext_budget)
    return SingReport(q=q, is_complete_intersection_codim=(dZ == m - 1 - r), dim_Z=dZ, dim_sing=ds,
                      point_counts=counts, k_list=sorted(counts), seed=seed)


def nonsingular_defect(forms: Sequence[IntPoly], q: int, **kw) -> str | None:
    """None when ``Z_q`` is a nonsingular complete intersection, else a description."""
    m, r = forms[0].n_vars, len(forms)
    try:
        dZ = dimension(forms, q, **kw)
        if dZ != m - 1 - r:
            return f"dim Z_{q} = {dZ}, expected {m - 1 - r}"
        ds = sing_dimension(forms, q, **kw)
    except DimensionAmbiguous as exc:
        return str(exc)
    if ds != -1:
        return f"dim Sing Z_{q} = {ds}"
    return None


# -- point-set dimension (Hilbert function) -------------------------------------

def hilbert_function(points: np.ndarray, q: int, t: int) -> int:
    """Rank of the degree-``t`` monomial evaluation matrix on ``points``."""
    if len(points) == 0:
        return 0
    m = points.shape[1]
    ctx = field(q)
    cols = []
    for e in monomials(m, t):
        cols.append(ctx.eval_terms(np.array([e]), np.array([1]), points))
    return ff.rank_mod(np.stack(cols, axis=1), q)


def point_set_dimension(points: np.ndarray, q: int, max_degree: int = 6) -> int:
    """Dimension proxy for a set of ``F_q``-points of ``P^{m-1}``.

    Reads the degree of the Hilbert polynomial off the finite differences of
    the Hilbert function, using only degrees ``t < q`` before the function
    saturates at ``#points``.
    """
    points = np.asarray(points, dtype=np.int64)
    N = len(points)
    if N == 0:
        return -1
    m = points.shape[1]
    T = min(q - 1, max_degree)
    h = []
    for t in range(T + 1):
        v = hilbert_function(points, q, t)
        if v >= N:
            break
        h.append(v)
    if len(h) < 3:
        return 0
    seq = np.array(h)
    for j in range(len(h) - 1):
        diff = np.diff(seq, n=j + 1)
        if diff[-1] == 0:
            return min(j, m - 1)
    return min(len(h) - 1, m - 1)


# -- strata of the differenced forms ----------------------------------------------

@dataclass
class Strata:
    q: int
    n: int
    pairs: list            # (x, y) coordinate tuples of S
    fiber_sizes: dict      # y -> #S_y
    fiber_dims: dict       # y -> proxy dim S_y
    T: dict                # s -> sorted list of y
    dim_T: dict            # s -> estimate
    dim_S: int
    S_ratio: float         # #S / q^(n-2)


def strata_sets(forms: Sequence[IntPoly], q: int, seed: int = 0, check: bool = True,
                ext_budget: int | None = None) -> Strata:
    """Enumerate ``S``, its fibres ``S_y`` and the loci ``T_s`` over ``F_q``.

    ``S = {(x, y) : y.grad G_i(x) = 0, rank (y.Hess G_i(x))_i < r}``; a fibre
    counts as having dimension ``>= s`` when it holds at least half the points
    of ``P^s(F_q)``.
    """
    n, r = forms[0].n_vars, len(forms)
    bad = [f.degree for f in forms if f.degree % q == 0]
    if bad:
        raise HypothesisError(f"q={q} divides a degree {bad}")
    if not all(f.is_homogeneous() for f in forms):
        raise PreconditionError("strata_sets needs homogeneous forms")
    if check:
        defect = nonsingular_defect(forms, q, seed=seed, ext_budget=ext_budget)
        if defect:
            raise HypothesisError(f"Z_q is not a nonsingular complete intersection: {defect}")
    ctx = field(q)
    P = np.concatenate(list(ff.projective_chunks(ctx, n)))
    Np = len(P)
    grads = [np.stack([FieldPoly(g, ctx).eval_many(P) for g in gradient(f)]) for f in forms]
    hess = [np.stack([np.stack([FieldPoly(h, ctx).eval_many(P) for h in row]) for row in hessian(f)])
            for f in forms]
    fiber = np.zeros(Np, dtype=np.int64)
    pairs = []
    block = max(1, 2_000_000 // (Np * n))
    for y0 in range(0, Np, block):
        Y = P[y0:y0 + block]
        cond = np.ones((len(Y), Np), dtype=bool)
        rows = []
        for g, H in zip(grads, hess):
            cond &= (Y @ g) % q == 0
            M = np.einsum("yj,jkx->ykx", Y, H) % q
            rows.append([M[:, k, :] for k in range(n)])
        cond &= ff.rank_below(ctx, rows)
        fiber[y0:y0 + len(Y)] = cond.sum(axis=1)
        for yi, xi in zip(*np.nonzero(cond)):
            pairs.append((tuple(int(v) for v in P[xi]), tuple(int(v) for v in Y[yi])))
    sizes = [projective_size(ctx, s + 1) for s in range(n)]
    fdim = np.full(Np, -1)
    for s in range(n):
        fdim[2 * fiber >= sizes[s]] = s
    fdim[fiber == 0] = -1
    ykeys = [tuple(int(v) for v in y) for y in P]
    T = {s: sorted(ykeys[i] for i in np.nonzero(fdim >= s)[0]) for s in range(-1, n)}
    dim_T = {s: point_set_dimension(np.array(T[s], dtype=np.int64).reshape(-1, n), q) for s in T}
    dim_S = max([dim_T[s] + s for s in range(0, n) if T[s]], default=-1)
    return Strata(q=q, n=n, pairs=pairs,
                  fiber_sizes={ykeys[i]: int(fiber[i]) for i in range(Np)},
                  fiber_dims={ykeys[i]: int(fdim[i]) for i in range(Np)},
                  T=T, dim_T=dim_T, dim_S=dim_S, S_ratio=len(pairs) / q ** (n - 2))


# -- searches replacing existence lemmas -----------------------------------------

def linear_coeffs(L: IntPoly) -> list[int]:
    if L.degree != 1 or not L.is_homogeneous():
        raise PreconditionError("expected a linear form")
    unit = lambda i: tuple(int(i == j) for j in range(L.n_vars))  # noqa: E731
    return [L.terms.get(unit(i), 0) for i in range(L.n_vars)]


def hyperplane_section(forms: Sequence[IntPoly], L, q: int) -> list[IntPoly]:
    """Forms on ``{L = 0} ~ P^{m-2}``, eliminating the last coordinate with ``L_j != 0 (q)``."""
    m = forms[0].n_vars
    if isinstance(L, IntPoly):
        L = linear_coeffs(L)
    L = [int(c) % q for c in L]
    piv = max((j for j in range(m) if L[j]), default=None)
    if piv is None:
        raise PreconditionError("linear form vanishes mod q")
    inv = pow(L[piv], -1, q)
    others = [i for i in range(m) if i != piv]
    M = []
    for i in range(m):
        if i == piv:
            M.append([(-inv * L[o]) % q for o in others])
        else:
            M.append([int(o == i) for o in others])
    return [f.compose_linear(M).reduce(q) for f in forms]


def _linear_candidates(m: int, height_bound: int):
    for h in range(1, height_bound + 1):
        cands = []
        for v in itertools.product(range(-h, h + 1), repeat=m):
            if max(abs(c) for c in v) != h:
                continue
            lead = next(c for c in v if c)
            if lead < 0:
                continue
            cands.append(v)
        yield from sorted(cands)


def find_good_hyperplane(forms: Sequence[IntPoly], q: int, height_bound: int = 1, seed: int = 0,
                         ext_budget: int | None = None) -> IntPoly:
    """Smallest-height integer linear form whose section lowers both dimensions by one."""
    m, r = forms[0].n_vars, len(forms)
    kw = dict(seed=seed, ext_budget=ext_budget)
    dZ = dimension(forms, q, **kw)
    if dZ != m - 1 - r:
        raise HypothesisError(f"Z_q has dimension {dZ}, not codimension {r}")
    s = sing_dimension(forms, q, **kw)
    if s < 0:
        raise PreconditionError("Z_q is nonsingular: no hyperplane can lower dim Sing")
    for v in _linear_candidates(m, height_bound):
        if all(c % q == 0 for c in v):
            continue
        sec = hyperplane_section(forms, v, q)
        try:
            if dimension(sec, q, **kw) != dZ - 1:
                continue
            if sing_dimension(sec, q, **kw) != s - 1:
                continue
        except DimensionAmbiguous:
            continue
        return IntPoly.linear(list(v))
    raise SearchExhausted(
        f"no good hyperplane with height <= {height_bound}; raise the height bound")


def find_good_prime(instance: Instance | Sequence[IntPoly], target: int, window_factor: float = 2.0,
                    seed: int = 0, ext_budget: int | None = None) -> int:
    """Smallest prime in ``[target, window_factor * target]`` with ``Z_p`` nonsingular of codim r."""
    forms = instance.leading_forms if isinstance(instance, Instance) else list(instance)
    failed = []
    for p in primes_in(int(target), int(window_factor * target)):
        defect = nonsingular_defect(forms, p, seed=seed, ext_budget=ext_budget)
        if defect is None:
            return p
        failed.append(f"{p}: {defect}")
    raise NoGoodPrimeError(f"no good prime in [{target}, {window_factor * target}]; "
                           f"rejected {', '.join(failed) or 'nothing (no primes)'}")
