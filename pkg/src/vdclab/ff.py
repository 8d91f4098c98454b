"""Finite fields F_{q^k}, additive characters and point enumeration.

Field elements are encoded as integers ``c_0 + c_1 q + ... + c_{k-1} q^{k-1}``
holding their coordinates in the power basis of ``F_q[t]/(modulus)``, so
``F_q`` sits inside every extension as the codes ``0..q-1``.  All kernels
operate on numpy int64 arrays of codes.
"""

from __future__ import annotations

import cmath
import functools
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field as dc_field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .primes import is_prime, prime_factors

DEFAULT_BUDGET = 10**9
_budget = [DEFAULT_BUDGET]
MAX_FIELD_ORDER = 1 << 22
CHUNK = 1 << 16


class EnumerationBudgetError(RuntimeError):
    pass


def get_budget() -> int:
    return _budget[0]


def set_budget(n: int) -> None:
    _budget[0] = int(n)


@contextmanager
def budget(n: int):
    old = _budget[0]
    _budget[0] = int(n)
    try:
        yield
    finally:
        _budget[0] = old


def check_budget(points: int, limit: int | None = None) -> None:
    limit = get_budget() if limit is None else limit
    if points > limit:
        raise EnumerationBudgetError(
            f"enumeration of {points} points exceeds the budget of {limit} (raise it with --budget)")


# -- scalar polynomial arithmetic over F_q (coefficient lists, low -> high) ---

def _trim(a):
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


def _pmod(a, m, q):
    a = [x % q for x in a]
    inv = pow(m[-1], -1, q)
    dm = len(m) - 1
    for d in range(len(a) - 1, dm - 1, -1):
        c = a[d] * inv % q
        if c:
            for i in range(dm + 1):
                a[d - dm + i] = (a[d - dm + i] - c * m[i]) % q
    return _trim(a[:dm])


def _pmul(a, b, q):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % q
    return _trim(out)


def _ppowmod(a, e, m, q):
    result, base = [1], _pmod(a, m, q)
    while e:
        if e & 1:
            result = _pmod(_pmul(result, base, q), m, q)
        base = _pmod(_pmul(base, base, q), m, q)
        e >>= 1
    return result


def _pgcd(a, b, q):
    a, b = _trim([x % q for x in a]), _trim([x % q for x in b])
    while b:
        a, b = b, _pmod(a, b, q)
    return a


def is_irreducible(poly: Sequence[int], q: int) -> bool:
    """Ben-Or test for a monic polynomial (coefficients low -> high) over F_q."""
    f = _trim([c % q for c in poly])
    k = len(f) - 1
    if k <= 0:
        return False
    if k == 1:
        return True
    t = [0, 1]
    power = t
    for _ in range(k // 2):
        power = _ppowmod(power, q, f, q)
        diff = _trim([(x - y) % q for x, y in itertools.zip_longest(power, t, fillvalue=0)])
        if len(_pgcd(f, diff, q)) != 1:
            return False
    return True


@functools.lru_cache(maxsize=None)
def find_irreducible(q: int, k: int) -> tuple[int, ...]:
    """Smallest monic irreducible of degree k, coefficients low -> high.

    For k=1 the placeholder ``t`` is returned.  Candidates are scanned by
    ``(c_{k-1}, ..., c_0)`` in lexicographic order.
    """
    if not is_prime(q):
        raise ValueError(f"{q} is not prime")
    if k < 1:
        raise ValueError("k must be positive")
    if k == 1:
        return (0, 1)
    for high_to_low in itertools.product(range(q), repeat=k):
        cand = list(reversed(high_to_low)) + [1]
        if is_irreducible(cand, q):
            return tuple(cand)
    raise AssertionError("unreachable: irreducibles exist in every degree")


# -- the field context --------------------------------------------------------

@dataclass(frozen=True)
class FieldCtx:
    """The field ``F_{q^k}`` with its canonical modulus."""

    q: int
    k: int = 1
    modulus: tuple = dc_field(default=(), compare=False)

    def __post_init__(self):
        if not is_prime(self.q):
            raise ValueError(f"{self.q} is not prime")
        if self.k < 1:
            raise ValueError("k must be positive")
        if not self.modulus:
            object.__setattr__(self, "modulus", find_irreducible(self.q, self.k))
        if len(self.modulus) != self.k + 1 or self.modulus[-1] != 1:
            raise ValueError("modulus must be monic of degree k")
        if self.k > 1 and not is_irreducible(self.modulus, self.q):
            raise ValueError(f"modulus {self.modulus} is reducible over F_{self.q}")
        if self.q ** self.k > MAX_FIELD_ORDER:
            raise ValueError(f"field order {self.q}^{self.k} too large for table arithmetic")

    def __repr__(self):
        return f"F_{self.q}" if self.k == 1 else f"F_{self.q}^{self.k}"

    @property
    def order(self) -> int:
        return self.q ** self.k

    @functools.cached_property
    def _qpow(self) -> np.ndarray:
        return self.q ** np.arange(self.k, dtype=np.int64)

    # -- digit (coordinate) representation --

    def digits(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        return (a[..., None] // self._qpow) % self.q

    def from_digits(self, d) -> np.ndarray:
        return (np.asarray(d, dtype=np.int64) % self.q) @ self._qpow

    def _scalar_poly(self, code: int) -> list[int]:
        return _trim([(code // self.q**i) % self.q for i in range(self.k)])

    def _scalar_code(self, poly) -> int:
        return sum((c % self.q) * self.q**i for i, c in enumerate(poly))

    def _mul_const(self, codes: np.ndarray, c: int) -> np.ndarray:
        """Vectorized multiplication by one field element (used to build tables)."""
        q, k = self.q, self.k
        D = self.digits(codes)
        cd = self.digits(np.int64(c))
        R = np.zeros(D.shape[:-1] + (2 * k - 1,), dtype=np.int64)
        for i in range(k):
            if cd[i]:
                R[..., i:i + k] = (R[..., i:i + k] + D * int(cd[i])) % q
        low = np.asarray(self.modulus[:k], dtype=np.int64)
        for d in range(2 * k - 2, k - 1, -1):
            coef = R[..., d] % q
            R[..., d - k:d] = (R[..., d - k:d] - coef[..., None] * low) % q
            R[..., d] = 0
        return self.from_digits(R[..., :k])

    @functools.cached_property
    def _tables(self):
        Q = self.order
        m = list(self.modulus)
        factors = prime_factors(Q - 1)
        gen = None
        for cand in range(2, Q):
            g = self._scalar_poly(cand)
            if all(_ppowmod(g, (Q - 1) // l, m, self.q) != [1] for l in factors):
                gen = cand
                break
        block = min(Q - 1, 64)
        cur = [1]
        g = self._scalar_poly(gen)
        exp = np.empty(Q - 1, dtype=np.int64)
        for i in range(block):
            exp[i] = self._scalar_code(cur)
            cur = _pmod(_pmul(cur, g, self.q), m, self.q)
        # doubling: g^(pos + i) = g^pos * g^i for the known prefix i < pos
        pos = block
        while pos < Q - 1:
            take = min(pos, Q - 1 - pos)
            step = self._scalar_code(_ppowmod(g, pos, m, self.q))
            exp[pos:pos + take] = self._mul_const(exp[:take], step)
            pos += take
        log = np.zeros(Q, dtype=np.int64)
        log[exp] = np.arange(Q - 1, dtype=np.int64)
        return gen, exp, log

    # -- vectorized arithmetic on codes --

    @functools.cached_property
    def _zech(self) -> np.ndarray:
        """``zech[j] = log(1 + g^j)``, or -1 where ``1 + g^j = 0``."""
        _, exp, log = self._tables
        one_plus = self.from_digits(self.digits(exp) + self.digits(np.int64(1)))
        return np.where(one_plus == 0, -1, log[one_plus])

    @functools.cached_property
    def _neg_one_log(self) -> int:
        return int(self._tables[2][self._scalar_code([self.q - 1])])

    def add(self, a, b):
        if self.k == 1:
            return (np.asarray(a, dtype=np.int64) + b) % self.q
        # Zech logarithms: a + b = a (1 + b/a)
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        _, exp, log = self._tables
        zech = self._zech
        Q1 = self.order - 1
        la, lb = log[a], log[b]
        d = lb - la
        d += Q1 * (d < 0)
        z = zech[d]
        t = la + z
        t -= Q1 * (t >= Q1)
        out = np.where(z < 0, 0, exp[t])
        out = np.where(a == 0, b, out)
        return np.where(b == 0, a, out)

    def neg(self, a):
        if self.k == 1:
            return (-np.asarray(a, dtype=np.int64)) % self.q
        a = np.asarray(a, dtype=np.int64)
        _, exp, log = self._tables
        return np.where(a == 0, 0, exp[(log[a] + self._neg_one_log) % (self.order - 1)])

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.k == 1:
            return a * b % self.q
        _, exp, log = self._tables
        out = exp[(log[a] + log[b]) % (self.order - 1)]
        return np.where((a == 0) | (b == 0), 0, out)

    def pow(self, a, e: int):
        a = np.asarray(a, dtype=np.int64)
        if self.k == 1:
            out = np.ones_like(a)
            base = a % self.q
            while e:
                if e & 1:
                    out = out * base % self.q
                base = base * base % self.q
                e >>= 1
            return out
        if e == 0:
            return np.ones_like(a)
        _, exp, log = self._tables
        out = exp[(log[a] * e) % (self.order - 1)]
        return np.where(a == 0, 0, out)

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("inverse of zero")
        if self.k == 1:
            return self.pow(a, self.q - 2)
        _, exp, log = self._tables
        return exp[(-log[a]) % (self.order - 1)]

    def frobenius(self, a):
        return self.pow(a, self.q)

    def eval_terms(self, exps: np.ndarray, coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Evaluate ``sum_t coeffs[t] * prod_j x_j^exps[t, j]`` at every row of ``pts``."""
        pts = np.asarray(pts, dtype=np.int64)
        N = pts.shape[0]
        q = self.q
        if len(coeffs) == 0:
            return np.zeros(N, dtype=np.int64)
        if self.k == 1:
            acc = np.zeros(N, dtype=np.int64)
            powers: dict[tuple[int, int], np.ndarray] = {}

            def pw(j, e):
                key = (j, e)
                if key not in powers:
                    if e == 1:
                        powers[key] = pts[:, j] % q
                    else:
                        powers[key] = pw(j, e - 1) * pts[:, j] % q
                return powers[key]

            for e, c in zip(exps, coeffs):
                t = np.full(N, int(c) % q, dtype=np.int64)
                for j in np.nonzero(e)[0]:
                    t = t * pw(int(j), int(e[j])) % q
                acc += t
                acc %= q
            return acc
        _, exp, log = self._tables
        L = log[pts]
        Z = pts == 0
        acc = np.zeros(N, dtype=np.int64)
        for e, c in zip(exps, coeffs):
            nz = np.nonzero(e)[0]
            s = np.full(N, int(log[int(c)]), dtype=np.int64)
            for j in nz:
                s += int(e[j]) * L[:, j]
            val = exp[s % (self.order - 1)]
            if len(nz):
                val = np.where(Z[:, nz].any(axis=1), 0, val)
            acc = self.add(acc, val)
        return acc

    def element(self, value) -> "FieldElem":
        if isinstance(value, (list, tuple)):
            return FieldElem(self, self._scalar_code(value))
        return FieldElem(self, int(value) % self.q if self.k == 1 else int(value))


@functools.lru_cache(maxsize=None)
def field(q: int, k: int = 1) -> FieldCtx:
    """Cached canonical field context."""
    return FieldCtx(q, k)


@dataclass(frozen=True)
class FieldElem:
    """A single element of ``F_{q^k}`` (thin wrapper over the vectorized ops)."""

    ctx: FieldCtx
    code: int

    @property
    def coeffs(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.ctx.digits(self.code))

    def _other(self, b):
        return b.code if isinstance(b, FieldElem) else self.ctx.element(b).code

    def __add__(self, b):
        return FieldElem(self.ctx, int(self.ctx.add(self.code, self._other(b))))

    __radd__ = __add__

    def __sub__(self, b):
        return FieldElem(self.ctx, int(self.ctx.sub(self.code, self._other(b))))

    def __neg__(self):
        return FieldElem(self.ctx, int(self.ctx.neg(self.code)))

    def __mul__(self, b):
        return FieldElem(self.ctx, int(self.ctx.mul(self.code, self._other(b))))

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        return FieldElem(self.ctx, int(self.ctx.pow(self.code, e)))

    def inverse(self):
        return FieldElem(self.ctx, int(self.ctx.inv(self.code)))

    def __truediv__(self, b):
        return self * FieldElem(self.ctx, self._other(b)).inverse()

    def __bool__(self):
        return self.code != 0


@dataclass(frozen=True)
class ProjPoint:
    """Projective point with first nonzero coordinate equal to 1."""

    coords: tuple

    @classmethod
    def normalized(cls, coords: Sequence[int], ctx: FieldCtx) -> "ProjPoint":
        coords = [int(c) for c in coords]
        lead = next((c for c in coords if c), None)
        if lead is None:
            raise ValueError("the zero vector is not a projective point")
        inv = int(ctx.inv(lead))
        return cls(tuple(int(v) for v in ctx.mul(np.asarray(coords), inv)))

    def __len__(self):
        return len(self.coords)


def normalize_rows(pts: np.ndarray, ctx: FieldCtx) -> np.ndarray:
    """Scale each nonzero row so its first nonzero entry is 1."""
    pts = np.asarray(pts, dtype=np.int64)
    nz = pts != 0
    if not nz.any(axis=1).all():
        raise ValueError("zero row")
    lead = pts[np.arange(len(pts)), nz.argmax(axis=1)]
    return ctx.mul(pts, ctx.inv(lead)[:, None])


# -- characters ---------------------------------------------------------------

def additive_character(ctx: FieldCtx, a: int) -> complex:
    """``e_q(a) = exp(2 pi i a / q)``; only the prime field is supported."""
    if ctx.k != 1:
        raise NotImplementedError("trace characters on F_{q^k}, k > 1, are not supported")
    return cmath.exp(2j * math.pi * (int(a) % ctx.q) / ctx.q)


@functools.lru_cache(maxsize=64)
def char_table(q: int) -> np.ndarray:
    """``e_q(j)`` for ``j = 0..q-1``."""
    return np.exp(2j * np.pi * np.arange(q) / q)


# -- enumeration ----------------------------------------------------------------

def affine_size(ctx: FieldCtx, m: int) -> int:
    return ctx.order ** m


def projective_size(ctx: FieldCtx, m: int) -> int:
    """Number of points of ``P^{m-1}(F_{q^k})``."""
    Q = ctx.order
    return (Q**m - 1) // (Q - 1)


def _index_to_points(idx: np.ndarray, Q: int, m: int) -> np.ndarray:
    pts = np.empty((len(idx), m), dtype=np.int64)
    idx = idx.copy()
    for j in range(m - 1, -1, -1):
        pts[:, j] = idx % Q
        idx //= Q
    return pts


def affine_chunks(ctx: FieldCtx, m: int, chunk: int = CHUNK,
                  budget: int | None = None) -> Iterator[np.ndarray]:
    """All of ``F_{q^k}^m`` in lexicographic order, as ``(N, m)`` arrays."""
    Q = ctx.order
    total = Q**m
    check_budget(total, budget)
    if m == 0:
        yield np.zeros((1, 0), dtype=np.int64)
        return
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        yield _index_to_points(idx, Q, m)


def projective_chunks(ctx: FieldCtx, m: int, chunk: int = CHUNK,
                      budget: int | None = None) -> Iterator[np.ndarray]:
    """Normalized points of ``P^{m-1}(F_{q^k})`` in lexicographic order."""
    if m < 1:
        raise ValueError("projective space needs at least one coordinate")
    check_budget(projective_size(ctx, m), budget)
    Q = ctx.order
    for lead in range(m - 1, -1, -1):
        free = m - 1 - lead
        total = Q**free
        for start in range(0, total, chunk):
            idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
            pts = np.zeros((len(idx), m), dtype=np.int64)
            pts[:, lead] = 1
            if free:
                pts[:, lead + 1:] = _index_to_points(idx, Q, free)
            yield pts


def enumerate_affine(ctx: FieldCtx, m: int, budget: int | None = None) -> Iterator[tuple]:
    for chunk in affine_chunks(ctx, m, budget=budget):
        for row in chunk:
            yield tuple(int(v) for v in row)


def enumerate_projective(ctx: FieldCtx, m: int, budget: int | None = None) -> Iterator[ProjPoint]:
    for chunk in projective_chunks(ctx, m, budget=budget):
        for row in chunk:
            yield ProjPoint(tuple(int(v) for v in row))


def reduce_chunks(chunks: Iterable[np.ndarray], fn: Callable[[np.ndarray], int],
                  workers: int = 1) -> int:
    """Sum ``fn`` over chunks; with ``workers > 1`` chunks are processed concurrently."""
    if workers <= 1:
        return sum(fn(c) for c in chunks)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return sum(ex.map(fn, chunks))


# -- determinants over the field ------------------------------------------------

def rank_below(ctx: FieldCtx, rows: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """Pointwise test ``rank < r`` for an ``r x n`` matrix of code arrays."""
    r = len(rows)
    n = len(rows[0])
    shape = np.shape(rows[0][0])
    if r > n:
        return np.ones(shape, dtype=bool)
    deficient = np.ones(shape, dtype=bool)
    perms = []
    for perm in itertools.permutations(range(r)):
        inv = sum(1 for i in range(r) for j in range(i + 1, r) if perm[i] > perm[j])
        perms.append((perm, inv % 2))
    for cols in itertools.combinations(range(n), r):
        det = np.zeros(shape, dtype=np.int64)
        for perm, odd in perms:
            t = rows[0][cols[perm[0]]]
            for i in range(1, r):
                t = ctx.mul(t, rows[i][cols[perm[i]]])
            det = ctx.sub(det, t) if odd else ctx.add(det, t)
        deficient &= det == 0
        if not deficient.any():
            break
    return deficient


# -- linear algebra over the prime field ----------------------------------------

def rref_mod(M, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over ``F_q`` and the pivot columns."""
    A = np.array(M, dtype=np.int64) % q
    if A.ndim == 1:
        A = A[None, :]
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(A[r:, c])[0]
        if not len(nz):
            continue
        p = r + nz[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        A[r] = A[r] * pow(int(A[r, c]), -1, q) % q
        col = A[:, c].copy()
        col[r] = 0
        A = (A - col[:, None] * A[r][None, :]) % q
        pivots.append(c)
        r += 1
    return A[:r], pivots


def rank_mod(M, q: int) -> int:
    if np.size(M) == 0:
        return 0
    return len(rref_mod(M, q)[1])


def kernel_mod(M, q: int) -> np.ndarray:
    """Basis (as rows) of the right kernel of ``M`` over ``F_q``."""
    M = np.array(M, dtype=np.int64)
    cols = M.shape[1]
    R, piv = rref_mod(M, q)
    free = [c for c in range(cols) if c not in piv]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.int64)
        v[f] = 1
        for i, pc in enumerate(piv):
            v[pc] = (-R[i, f]) % q
        basis.append(v)
    return np.array(basis, dtype=np.int64).reshape(len(basis), cols)


def rref_field(ctx: FieldCtx, M) -> tuple[np.ndarray, list[int]]:
    """:func:`rref_mod` over an arbitrary ``F_{q^k}`` (entries are element codes)."""
    if ctx.k == 1:
        return rref_mod(M, ctx.q)
    A = np.array(M, dtype=np.int64)
    if A.ndim == 1:
        A = A[None, :]
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(A[r:, c])[0]
        if not len(nz):
            continue
        p = r + nz[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        A[r] = ctx.mul(A[r], ctx.inv(A[r, c]))
        for i in range(rows):
            if i != r and A[i, c]:
                A[i] = ctx.sub(A[i], ctx.mul(A[i, c], A[r]))
        pivots.append(c)
        r += 1
    return A[:r], pivots


def kernel_field(ctx: FieldCtx, M) -> np.ndarray:
    """Basis (as rows of codes) of the right kernel of ``M`` over ``ctx``."""
    M = np.array(M, dtype=np.int64)
    cols = M.shape[1]
    R, piv = rref_field(ctx, M)
    basis = []
    for f in (c for c in range(cols) if c not in piv):
        v = np.zeros(cols, dtype=np.int64)
        v[f] = 1
        for i, pc in enumerate(piv):
            v[pc] = int(ctx.neg(R[i, f]))
        basis.append(v)
    return np.array(basis, dtype=np.int64).reshape(len(basis), cols)


@functools.lru_cache(maxsize=None)
def embedding(q: int, j: int, k: int) -> np.ndarray:
    """Codes of ``F_{q^j}`` mapped into ``F_{q^k}`` (requires ``j | k``).

    The generator ``t`` of ``F_{q^j}`` goes to the smallest root of its
    minimal polynomial in ``F_{q^k}``, so the map is a field homomorphism.
    """
    if k % j:
        raise ValueError(f"F_{q}^{j} does not embed in F_{q}^{k}")
    small, big = field(q, j), field(q, k)
    if j == k:
        return np.arange(small.order, dtype=np.int64)
    xs = np.arange(big.order, dtype=np.int64)
    acc = np.zeros_like(xs)
    for c in reversed(small.modulus):
        acc = big.add(big.mul(acc, xs), c)
    theta = int(np.nonzero(acc == 0)[0][0])
    powers = [1]
    for _ in range(j - 1):
        powers.append(int(big.mul(powers[-1], theta)))
    D = small.digits(np.arange(small.order, dtype=np.int64))
    out = np.zeros(small.order, dtype=np.int64)
    for i, p in enumerate(powers):
        out = big.add(out, big.mul(D[:, i], p))
    return out
