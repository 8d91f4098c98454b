"""Exact sparse multivariate polynomials over the integers.

An :class:`IntPoly` maps exponent tuples to nonzero Python ints.  Every
operation is exact; reduction to a finite field happens only through
:func:`reduce_mod`, which hands back a compiled :class:`FieldPoly` bound to a
:class:`~vdclab.ff.FieldCtx`.
"""

from __future__ import annotations

import itertools
import math
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

NEG_INF = float("-inf")

Exponent = tuple


class IntPoly:
    """Immutable sparse polynomial in ``n_vars`` variables with integer coefficients."""

    __slots__ = ("n_vars", "_terms", "_hash")

    def __init__(self, n_vars: int, terms: Mapping[Sequence[int], int] | None = None):
        if n_vars < 1:
            raise ValueError("n_vars must be positive")
        clean: dict[tuple, int] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != n_vars:
                raise ValueError(f"exponent {exp} has length {len(exp)}, expected {n_vars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = int(c)
            if c:
                clean[exp] = clean.get(exp, 0) + c
                if not clean[exp]:
                    del clean[exp]
        object.__setattr__(self, "n_vars", n_vars)
        object.__setattr__(self, "_terms", clean)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("IntPoly is immutable")

    def __reduce__(self):
        return (type(self), (self.n_vars, self._terms))

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, n_vars: int) -> "IntPoly":
        return cls(n_vars)

    @classmethod
    def const(cls, n_vars: int, c: int) -> "IntPoly":
        return cls(n_vars, {(0,) * n_vars: c})

    @classmethod
    def var(cls, n_vars: int, i: int) -> "IntPoly":
        exp = [0] * n_vars
        exp[i] = 1
        return cls(n_vars, {tuple(exp): 1})

    @classmethod
    def linear(cls, coeffs: Sequence[int], constant: int = 0) -> "IntPoly":
        n = len(coeffs)
        terms = {}
        for i, c in enumerate(coeffs):
            e = [0] * n
            e[i] = 1
            terms[tuple(e)] = c
        terms[(0,) * n] = constant
        return cls(n, terms)

    @classmethod
    def monomial(cls, exp: Sequence[int], c: int = 1) -> "IntPoly":
        return cls(len(exp), {tuple(exp): c})

    # -- basic properties -------------------------------------------------

    @property
    def terms(self) -> Mapping[tuple, int]:
        return MappingProxyType(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self):
        """Total degree; the zero polynomial has degree ``-inf``."""
        if not self._terms:
            return NEG_INF
        return max(sum(e) for e in self._terms)

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self._terms}) <= 1

    def homogeneous_part(self, d: int) -> "IntPoly":
        return IntPoly(self.n_vars, {e: c for e, c in self._terms.items() if sum(e) == d})

    def leading_form(self) -> "IntPoly":
        return leading_form(self)

    def height(self) -> int:
        return max((abs(c) for c in self._terms.values()), default=0)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "IntPoly":
        if isinstance(other, IntPoly):
            if other.n_vars != self.n_vars:
                raise ValueError(f"variable count mismatch: {self.n_vars} vs {other.n_vars}")
            return other
        if isinstance(other, (int, np.integer)):
            return IntPoly.const(self.n_vars, int(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, 0) + c
        return IntPoly(self.n_vars, terms)

    __radd__ = __add__

    def __neg__(self):
        return IntPoly(self.n_vars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, np.integer)):
            return IntPoly(self.n_vars, {e: c * int(other) for e, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[tuple, int] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return IntPoly(self.n_vars, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = IntPoly.const(self.n_vars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, np.integer)):
            other = IntPoly.const(self.n_vars, int(other))
        if not isinstance(other, IntPoly):
            return NotImplemented
        return self.n_vars == other.n_vars and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.n_vars, frozenset(self._terms.items()))))
        return self._hash

    # -- calculus -----------------------------------------------------------

    def derivative(self, i: int) -> "IntPoly":
        terms = {}
        for e, c in self._terms.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                terms[tuple(e2)] = c * e[i]
        return IntPoly(self.n_vars, terms)

    def gradient(self) -> list["IntPoly"]:
        return gradient(self)

    def hessian(self) -> list[list["IntPoly"]]:
        return hessian(self)

    # -- evaluation & substitution --------------------------------------------

    def __call__(self, point: Sequence[int]) -> int:
        return self.eval(point)

    def eval(self, point: Sequence[int]) -> int:
        if len(point) != self.n_vars:
            raise ValueError("dimension mismatch")
        total = 0
        for e, c in self._terms.items():
            t = c
            for x, k in zip(point, e):
                if k:
                    t *= x**k
            total += t
        return total

    def compose(self, images: Sequence["IntPoly"]) -> "IntPoly":
        """Substitute ``x_i -> images[i]``; the result lives in the images' ring."""
        if len(images) != self.n_vars:
            raise ValueError("need one image per variable")
        m = images[0].n_vars
        result = IntPoly.zero(m)
        cache: dict[tuple[int, int], IntPoly] = {}
        for e, c in self._terms.items():
            t = IntPoly.const(m, c)
            for i, k in enumerate(e):
                if k:
                    if (i, k) not in cache:
                        cache[(i, k)] = images[i] ** k
                    t = t * cache[(i, k)]
            result = result + t
        return result

    def compose_linear(self, matrix: Sequence[Sequence[int]]) -> "IntPoly":
        """Substitute ``x = M @ t`` where ``M`` is ``n_vars x m`` (integer entries)."""
        m = len(matrix[0])
        images = [IntPoly(m, {tuple(int(j == c) for j in range(m)): row[c] for c in range(m)})
                  for row in matrix]
        return self.compose(images)

    def map_coeffs(self, fn) -> "IntPoly":
        return IntPoly(self.n_vars, {e: fn(c) for e, c in self._terms.items()})

    def reduce(self, q: int) -> "IntPoly":
        """Coefficients reduced into ``[0, q)`` (still an integer polynomial)."""
        return self.map_coeffs(lambda c: c % q)

    def content(self) -> int:
        g = 0
        for c in self._terms.values():
            g = math.gcd(g, c)
        return g

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {"n": self.n_vars,
                "terms": [[list(e), str(c)] for e, c in sorted(self._terms.items(), reverse=True)]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "IntPoly":
        n = int(obj["n"])
        terms: dict[tuple, int] = {}
        for exp, c in obj["terms"]:
            exp = tuple(int(e) for e in exp)
            terms[exp] = terms.get(exp, 0) + int(c)
        return cls(n, terms)

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in sorted(self._terms.items(), key=lambda t: (-sum(t[0]), [-x for x in t[0]])):
            mono = "*".join(f"x{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


class PolySystem:
    """An ordered tuple of polynomials sharing one variable count."""

    def __init__(self, polys: Iterable[IntPoly]):
        polys = tuple(polys)
        if not polys:
            raise ValueError("a system needs at least one polynomial")
        n = polys[0].n_vars
        if any(p.n_vars != n for p in polys):
            raise ValueError("all polynomials must share n_vars")
        self.n_vars = n
        self.polys = polys
        self._leading = None

    @property
    def leading_forms(self) -> tuple[IntPoly, ...]:
        if self._leading is None:
            self._leading = tuple(leading_form(p) for p in self.polys)
        return self._leading

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(p.degree for p in self.polys)

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        return self.polys[i]

    def __eq__(self, other):
        return isinstance(other, PolySystem) and self.polys == other.polys

    def __hash__(self):
        return hash(self.polys)

    def __repr__(self):
        return f"PolySystem({list(self.polys)!r})"


def leading_form(p: IntPoly) -> IntPoly:
    if p.is_zero():
        raise ValueError("no leading form of zero")
    return p.homogeneous_part(p.degree)


def translate_scale(p: IntPoly, shift: Sequence[int], scale: int) -> IntPoly:
    """Return ``p(x + scale*shift)``, expanded exactly."""
    if len(shift) != p.n_vars:
        raise ValueError(f"shift has length {len(shift)}, expected {p.n_vars}")
    c = [scale * int(s) for s in shift]
    if not any(c):
        return p
    n = p.n_vars
    terms: dict[tuple, int] = {}
    for e, coeff in p.terms.items():
        # (x_j + c_j)^{e_j} = sum_k binom(e_j, k) c_j^(e_j-k) x_j^k
        factors = [[(k, math.comb(ej, k) * c[j] ** (ej - k)) for k in range(ej + 1)]
                   for j, ej in enumerate(e)]
        for combo in itertools.product(*factors):
            t = coeff
            for _, w in combo:
                t *= w
            if t:
                exp = tuple(k for k, _ in combo)
                terms[exp] = terms.get(exp, 0) + t
    return IntPoly(n, terms)


def difference_poly(f: IntPoly, p: int, y: Sequence[int]) -> IntPoly:
    """The differenced polynomial ``f(x + p*y) - f(x)``."""
    if len(y) != f.n_vars:
        raise ValueError(f"shift has length {len(y)}, expected {f.n_vars}")
    return translate_scale(f, y, p) - f


def gradient(p: IntPoly) -> list[IntPoly]:
    return [p.derivative(i) for i in range(p.n_vars)]


def hessian(p: IntPoly) -> list[list[IntPoly]]:
    g = gradient(p)
    return [[gi.derivative(j) for j in range(p.n_vars)] for gi in g]


def directional(polys: Sequence[IntPoly], y: Sequence[int]) -> IntPoly:
    """``sum_j y_j * polys[j]`` -- e.g. ``y . grad F``."""
    out = IntPoly.zero(polys[0].n_vars)
    for yj, pj in zip(y, polys):
        if yj:
            out = out + pj * int(yj)
    return out


def determinant(matrix: Sequence[Sequence[IntPoly]]) -> IntPoly:
    """Leibniz expansion; fine for the r <= 4 matrices used here."""
    r = len(matrix)
    n_vars = matrix[0][0].n_vars
    total = IntPoly.zero(n_vars)
    for perm in itertools.permutations(range(r)):
        sign = 1
        for i in range(r):
            for j in range(i + 1, r):
                if perm[i] > perm[j]:
                    sign = -sign
        t = IntPoly.const(n_vars, sign)
        for i, j in enumerate(perm):
            t = t * matrix[i][j]
            if t.is_zero():
                break
        total = total + t
    return total


def jacobian_minors(forms: Sequence[IntPoly]) -> list[IntPoly]:
    """All maximal (r x r) minors of the Jacobian of ``forms``; rank < r iff all vanish."""
    r = len(forms)
    n = forms[0].n_vars
    jac = [gradient(f) for f in forms]
    minors = []
    for cols in itertools.combinations(range(n), r):
        m = determinant([[jac[i][c] for c in cols] for i in range(r)])
        if not m.is_zero():
            minors.append(m)
    return minors


def homogenize(p: IntPoly) -> IntPoly:
    """Homogenize with a new leading variable ``x0`` (index 0)."""
    d = p.degree
    if d == NEG_INF:
        return IntPoly.zero(p.n_vars + 1)
    return IntPoly(p.n_vars + 1, {(d - sum(e),) + e: c for e, c in p.terms.items()})


class FieldPoly:
    """A polynomial reduced into a finite field, compiled for vectorized evaluation."""

    def __init__(self, poly: IntPoly, ctx):
        self.ctx = ctx
        self.n_vars = poly.n_vars
        red = {e: c % ctx.q for e, c in poly.terms.items() if c % ctx.q}
        self.source = IntPoly(poly.n_vars, red)
        if red:
            self.exps = np.array(list(red.keys()), dtype=np.int64)
            self.coeffs = np.array(list(red.values()), dtype=np.int64)
        else:
            self.exps = np.zeros((0, poly.n_vars), dtype=np.int64)
            self.coeffs = np.zeros(0, dtype=np.int64)

    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    @property
    def degree(self):
        return self.source.degree

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at each row of an ``(N, n_vars)`` array of field codes."""
        return self.ctx.eval_terms(self.exps, self.coeffs, pts)

    def eval(self, point: Sequence[int]) -> int:
        return int(self.eval_many(np.asarray([point], dtype=np.int64))[0])

    def __repr__(self):
        return f"FieldPoly({self.source!r} over {self.ctx})"


def reduce_mod(p: IntPoly, ctx) -> FieldPoly:
    return FieldPoly(p, ctx)


def eval_mod(p: IntPoly, point: Sequence[int], ctx) -> int:
    """Evaluate ``p`` at a point of ``F_{q^k}^n`` given as field codes."""
    return reduce_mod(p, ctx).eval(point)


def monomials(n_vars: int, degree: int) -> list[tuple]:
    """All exponent vectors of total degree exactly ``degree``, in lex order."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n_vars), degree):
        e = [0] * n_vars
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return sorted(set(out), reverse=True)


def parse_poly(text: str, n_vars: int) -> IntPoly:
    """Parse an integer polynomial in ``x1..xn`` written with ``+ - * ^`` (or ``**``)."""
    import ast

    tree = ast.parse(text.replace("^", "**"), mode="eval")

    def go(node) -> IntPoly:
        if isinstance(node, ast.Expression):
            return go(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return IntPoly.const(n_vars, node.value)
        if isinstance(node, ast.Name):
            name = node.id
            if name.startswith("x") and name[1:].isdigit() and 1 <= int(name[1:]) <= n_vars:
                return IntPoly.var(n_vars, int(name[1:]) - 1)
            raise ValueError(f"unknown variable {name!r} (use x1..x{n_vars})")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = go(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                    raise ValueError("exponents must be integer literals")
                return go(node.left) ** node.right.value
            a, b = go(node.left), go(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
        raise ValueError(f"cannot parse {ast.unparse(node)!r}")

    return go(tree)
