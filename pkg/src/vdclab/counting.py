"""Lattice-point counts in boxes: exact, modular, and smoothly weighted."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ff, variety
from .errors import HypothesisError, PreconditionError
from .ff import field
from .poly import IntPoly, difference_poly

_INT64_SAFE = 2**62


@dataclass(frozen=True)
class BoxZ:
    """Product of closed integer intervals ``[lo_i, hi_i]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi differ in length")

    @classmethod
    def symmetric(cls, n: int, B: int) -> "BoxZ":
        return cls((-int(B),) * n, (int(B),) * n)

    @classmethod
    def centered(cls, center: Sequence[int], half: Sequence[int]) -> "BoxZ":
        return cls(tuple(int(c) - int(h) for c, h in zip(center, half)),
                   tuple(int(c) + int(h) for c, h in zip(center, half)))

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> tuple:
        return tuple(max(h - l + 1, 0) for l, h in zip(self.lo, self.hi))

    @property
    def npoints(self) -> int:
        return math.prod(self.sides)

    def is_empty(self) -> bool:
        return self.npoints == 0

    def axes(self) -> list[np.ndarray]:
        return [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(self.lo, self.hi)]

    def intersect(self, other: "BoxZ") -> "BoxZ":
        return BoxZ(tuple(map(max, self.lo, other.lo)), tuple(map(min, self.hi, other.hi)))

    def translate(self, v: Sequence[int]) -> "BoxZ":
        return BoxZ(tuple(l + int(t) for l, t in zip(self.lo, v)),
                    tuple(h + int(t) for h, t in zip(self.hi, v)))

    def points(self) -> np.ndarray:
        if self.is_empty():
            return np.zeros((0, self.n), dtype=np.int64)
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def to_json(self) -> dict:
        if all((h - l) % 2 == 0 for l, h in zip(self.lo, self.hi)):
            return {"center": [(l + h) // 2 for l, h in zip(self.lo, self.hi)],
                    "half": [(h - l) // 2 for l, h in zip(self.lo, self.hi)]}
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_json(cls, obj) -> "BoxZ":
        if "center" in obj:
            return cls.centered(obj["center"], obj["half"])
        return cls(tuple(obj["lo"]), tuple(obj["hi"]))


def as_box(box, n: int) -> BoxZ:
    if isinstance(box, BoxZ):
        return box
    if isinstance(box, dict):
        return BoxZ.from_json(box)
    return BoxZ.symmetric(n, int(box))


# -- grid evaluation ----------------------------------------------------------------

def grid_eval(poly: IntPoly, axes: Sequence[np.ndarray], modulus: int | None = None) -> np.ndarray:
    """Values of ``poly`` on the grid ``axes[0] x ... x axes[n-1]``.

    With ``modulus`` the result is reduced into ``[0, modulus)``; otherwise it
    is exact (``int64`` when a crude size bound allows it, Python ints if not).
    """
    n = poly.n_vars
    shape = tuple(len(a) for a in axes)
    if modulus is not None:
        m = int(modulus)
        if m >= 2**31:
            raise PreconditionError("modulus too large for int64 grid arithmetic")
        dtype = np.int64
        base = [a % m for a in axes]
    else:
        m = None
        reach = [int(np.abs(a).max()) if len(a) else 0 for a in axes]
        bound = sum(abs(c) * math.prod(r**k for r, k in zip(reach, e)) for e, c in poly.terms.items())
        dtype = np.int64 if bound < _INT64_SAFE else object
        base = [a.astype(dtype) for a in axes]
    out = np.zeros(shape, dtype=dtype)
    powers: dict[tuple[int, int], np.ndarray] = {}

    def pw(i, k):
        if (i, k) not in powers:
            v = np.ones(len(base[i]), dtype=dtype)
            for _ in range(k):
                v = v * base[i]
                if m is not None:
                    v %= m
            powers[(i, k)] = v.reshape([-1 if j == i else 1 for j in range(n)])
        return powers[(i, k)]

    for e, c in poly.terms.items():
        t = np.full((1,) * n, c % m if m is not None else c, dtype=dtype)
        for i, k in enumerate(e):
            if k:
                t = t * pw(i, k)
                if m is not None:
                    t %= m
        out = out + t
        if m is not None:
            out %= m
    return out


def _axis_chunks(box: BoxZ, target: int = ff.CHUNK * 16):
    """Split a box along its first axis into slabs of about ``target`` points."""
    axes = box.axes()
    rest = math.prod(len(a) for a in axes[1:])
    step = max(1, target // max(rest, 1))
    for s in range(0, len(axes[0]), step):
        yield [axes[0][s:s + step]] + axes[1:]


def _polys(instance) -> tuple[IntPoly, ...]:
    if isinstance(instance, variety.Instance):
        return instance.polys
    return tuple(instance)


def count_box(instance, box, budget: int | None = None) -> int:
    """``N(X, B)``: integer points of the box on which every ``f_i`` vanishes."""
    polys = _polys(instance)
    box = as_box(box, polys[0].n_vars)
    ff.check_budget(box.npoints, budget)
    if box.is_empty():
        return 0
    total = 0
    for axes in _axis_chunks(box):
        mask = np.ones(tuple(len(a) for a in axes), dtype=bool)
        for f in polys:
            mask &= grid_eval(f, axes) == 0
        total += int(mask.sum())
    return total


def _check_sides(box: BoxZ, m: int) -> None:
    if max(box.sides, default=0) > m:
        raise PreconditionError(
            f"box side {max(box.sides)} exceeds modulus {m}: residues would repeat")


def count_box_mod(instance, box, m: int, budget: int | None = None) -> int:
    """``N(X, B, m)``: box points with every ``f_i = 0 (mod m)``."""
    polys = _polys(instance)
    box = as_box(box, polys[0].n_vars)
    _check_sides(box, m)
    ff.check_budget(box.npoints, budget)
    if box.is_empty():
        return 0
    total = 0
    for axes in _axis_chunks(box):
        mask = np.ones(tuple(len(a) for a in axes), dtype=bool)
        for f in polys:
            mask &= grid_eval(f, axes, m) == 0
        total += int(mask.sum())
    return total


# -- Hooley-Deligne ----------------------------------------------------------------

@dataclass
class HooleyResult:
    q: int
    count: int
    main: int
    residual: int
    s: int | None
    bound: float | None
    ratio: float | None
    skipped: str | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def hooley_deligne_residual(instance: variety.Instance, q: int, seed: int = 0,
                            ext_budget: int | None = None, budget: int | None = None) -> HooleyResult:
    """``#X(F_q) - q^{n-r}`` against ``q^{(n-r+2+s)/2}`` with ``s = dim Sing Z_q``."""
    n, r = instance.n, instance.r
    count = variety.count_points(instance.polys, field(q), mode="affine", budget=budget)
    main = q ** (n - r)
    if n == r:
        bezout = math.prod(instance.degrees)
        return HooleyResult(q, count, main, count - main, None, None, None,
                            skipped=f"zero-dimensional: count <= {bezout}")
    Z = instance.leading_forms
    kw = dict(seed=seed, ext_budget=ext_budget)
    dZ = variety.dimension(Z, q, **kw)
    if dZ != n - 1 - r:
        raise HypothesisError(f"dim Z_{q} = {dZ}, expected {n - 1 - r}")
    s = variety.sing_dimension(Z, q, **kw)
    if s >= dZ and dZ >= 0:
        raise HypothesisError(f"Z_{q} is singular everywhere (dim Sing = dim Z = {s})")
    bound = float(q) ** ((n - r + 2 + s) / 2)
    res = count - main
    return HooleyResult(q, count, main, res, s, bound, abs(res) / bound)


# -- smooth weights ------------------------------------------------------------------

def _bump_derivative_polys(kmax: int, eps: float) -> list[np.polynomial.Polynomial]:
    """``P_j`` with ``phi^(j)(u) = phi(u) P_j(u) / (1 - u^2)^(2j)``."""
    P = np.polynomial.Polynomial
    one_m = P([1.0, 0.0, -1.0])
    u = P([0.0, 1.0])
    out = [P([1.0])]
    for j in range(kmax):
        Pj = out[-1]
        out.append(Pj.deriv() * one_m**2 + 4 * j * u * Pj * one_m - 2 * eps * u * Pj)
    return out


class BumpWeight:
    """``W(t) = prod_i phi(t_i / L)`` with ``phi(u) = exp(-eps / (1 - u^2))`` on ``|u| < 1``.

    ``eps = 1`` is the standard bump; letting ``eps -> 0`` sharpens it toward
    the indicator of ``(-L, L)^n``.
    """

    grid = 10_000

    def __init__(self, L: float = 1.0, eps: float = 1.0):
        if L <= 0 or eps <= 0:
            raise ValueError("L and eps must be positive")
        self.L = float(L)
        self.eps = float(eps)
        self._maxima: list[float] = []

    def phi(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1
        out[inside] = np.exp(-self.eps / (1 - u[inside] ** 2))
        return out

    def __call__(self, t) -> np.ndarray:
        """Weight at each row of ``t`` (shape ``(N, n)``)."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        return np.prod(self.phi(t / self.L), axis=1)

    def axis_values(self, xs: np.ndarray, scale: float) -> np.ndarray:
        return self.phi(np.asarray(xs, dtype=float) / (scale * self.L))

    def support_radius(self, scale: float) -> int:
        """Largest integer ``x`` with possibly nonzero ``W(x / scale)`` on an axis."""
        return math.ceil(self.L * scale) - 1

    def derivative_max(self, j: int) -> float:
        """``max |phi^(j)|`` over a uniform grid on ``(-1, 1)``."""
        if j >= len(self._maxima):
            self._extend(j)
        return self._maxima[j]

    def _extend(self, j: int) -> None:
        Ps = _bump_derivative_polys(j, self.eps)
        u = np.linspace(-1, 1, self.grid + 2)[1:-1]
        w = 1 - u**2
        self._maxima.clear()
        for i, P in enumerate(Ps):
            val = P(u)
            with np.errstate(divide="ignore"):
                logs = -self.eps / w + np.log(np.abs(val)) - 2 * i * np.log(w)
            self._maxima.append(float(np.exp(logs.max())) if np.isfinite(logs).any() else 0.0)

    def D(self, k: int, n: int) -> float:
        """Largest sup-norm of a k-th order partial of ``W(t)`` on ``R^n``."""
        best = 0.0
        for alpha in itertools.combinations_with_replacement(range(k + 1), n):
            if sum(alpha) != k:
                continue
            best = max(best, math.prod(self.derivative_max(a) for a in alpha))
        return best / self.L**k

    def D_table(self, n: int) -> dict[int, float] | None:
        """``D_0..D_{2n}`` for ``n <= 4``; None for larger ``n``."""
        if n > 4:
            return None
        return {k: self.D(k, n) for k in range(2 * n + 1)}

    def to_json(self) -> dict:
        return {"kind": "bump", "L": self.L, "eps": self.eps}


class IndicatorWeight:
    """Indicator of the closed cube ``[-L, L]^n``; not smooth, used for cross-checks."""

    def __init__(self, L: float = 0.5):
        self.L = float(L)

    def axis_values(self, xs: np.ndarray, scale: float) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return (np.abs(xs) <= scale * self.L + 1e-12).astype(float)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        return np.all(np.abs(t) <= self.L + 1e-12, axis=1).astype(float)

    def support_radius(self, scale: float) -> int:
        return math.floor(self.L * scale + 1e-12)

    def D_table(self, n: int):
        return None

    def to_json(self) -> dict:
        return {"kind": "indicator", "L": self.L}


def weight_from_json(obj) -> BumpWeight | IndicatorWeight:
    if obj.get("kind", "bump") == "indicator":
        return IndicatorWeight(obj.get("L", 0.5))
    return BumpWeight(obj.get("L", 1.0), obj.get("eps", 1.0))


def _outer(vals: Sequence[np.ndarray]) -> np.ndarray:
    out = vals[0]
    for v in vals[1:]:
        out = np.multiply.outer(out, v)
    return out


def _fsum(a: np.ndarray) -> float:
    return math.fsum(np.ravel(a).tolist())


def _check_B(B: float, q: int, b_max_factor: float) -> None:
    if B < 1:
        raise PreconditionError(f"B = {B} < 1")
    if B > b_max_factor * q:
        raise PreconditionError(f"B = {B} exceeds {b_max_factor} * q; raise b_max_factor to allow it")


def _mask_mod(polys, axes, q) -> np.ndarray:
    mask = np.ones(tuple(len(a) for a in axes), dtype=bool)
    for f in polys:
        mask &= grid_eval(f, axes, q) == 0
    return mask


def weighted_count(instance, weight, B: float, q: int, b_max_factor: float = 1.0,
                   budget: int | None = None) -> float:
    """``N_W(X, B, q) = sum over integer x with f(x) = 0 (mod q) of W(x / B)``."""
    polys = _polys(instance)
    n = polys[0].n_vars
    _check_B(B, q, b_max_factor)
    R = weight.support_radius(B)
    axes = [np.arange(-R, R + 1, dtype=np.int64)] * n
    ff.check_budget(len(axes[0]) ** n, budget)
    w = _outer([weight.axis_values(axes[0], B)] * n)
    if len(polys) and not all(f.is_zero() for f in polys):
        w = np.where(_mask_mod(polys, axes, q), w, 0.0)
    return _fsum(w)


@dataclass
class WeightedResidual:
    lhs: float
    rhs_main: float
    residual: float
    s: int
    paper_error_term: float | None
    ratio: float | None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def weighted_residual(instance: variety.Instance, weight, B: float, q: int, seed: int = 0,
                      b_max_factor: float = 1.0, ext_budget: int | None = None) -> WeightedResidual:
    """``N_W(X,B,q) - q^{-r} N_W(A^n,B,q)`` beside ``D_{2n} B^{s+1} q^{(n-r-s-2)/2} (B + q^{1/2})``."""
    n, r = instance.n, instance.r
    Z = instance.leading_forms
    dZ = variety.dimension(Z, q, seed=seed, ext_budget=ext_budget)
    if dZ != n - 1 - r:
        raise HypothesisError(f"dim Z_{q} = {dZ}, expected {n - 1 - r}")
    s = variety.sing_dimension(Z, q, seed=seed, ext_budget=ext_budget)
    lhs = weighted_count(instance, weight, B, q, b_max_factor)
    full = weighted_count([IntPoly.zero(n)], weight, B, q, b_max_factor)
    rhs = full / q**r
    table = weight.D_table(n)
    err = None
    if table is not None:
        err = table[2 * n] * B ** (s + 1) * q ** ((n - r - s - 2) / 2) * (B + math.sqrt(q))
    res = lhs - rhs
    return WeightedResidual(lhs, rhs, res, s, err, abs(res) / err if err else None)


def weighted_delta(instance, weight, B: float, p: int, q: int, y: Sequence[int],
                   b_max_factor: float = 1.0) -> float:
    """``sum_{f^y = 0 (q)} W_y(x) - q^{-r} sum_x W_y(x)`` with ``W_y(x) = W(x/2B) W((x+py)/2B)``."""
    polys = _polys(instance)
    n, r = polys[0].n_vars, len(polys)
    _check_B(B, q, b_max_factor)
    R = weight.support_radius(2 * B)
    lo = [max(-R, -R - p * int(t)) for t in y]
    hi = [min(R, R - p * int(t)) for t in y]
    if any(l > h for l, h in zip(lo, hi)):
        return 0.0
    axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(lo, hi)]
    vals = [weight.axis_values(a, 2 * B) * weight.axis_values(a + p * int(t), 2 * B)
            for a, t in zip(axes, y)]
    w = _outer(vals)
    diffs = [difference_poly(f, p, y) for f in polys]
    hit = w if all(d.is_zero() for d in diffs) else np.where(_mask_mod(diffs, axes, q), w, 0.0)
    return _fsum(hit) - _fsum(w) / q**r
