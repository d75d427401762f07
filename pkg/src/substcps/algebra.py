"""Exact arithmetic in Q(beta) on the power basis, plus numeric Galois embeddings.

Elements are stored as an integer numerator vector over ``1, beta, ..., beta^(n-1)``
with one shared positive denominator.  Python integers are used throughout, so
coefficients of high powers of ``beta`` never overflow.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .errors import (
    ContextMismatch,
    Inconclusive,
    NoConvergence,
    NonMonic,
    NotSquarefree,
    NotUnimodular,
    SizeLimit,
)

__all__ = [
    "IntPolynomial",
    "FieldContext",
    "AlgebraicElement",
    "EmbeddingData",
    "PisotVerdict",
    "field_from_min_poly",
    "mul",
    "inverse_of_beta",
    "find_roots",
    "galois_embed",
    "pisot_family_check",
    "characteristic_polynomial",
    "minimal_polynomial_of_perron",
]

MAX_FACTOR_DEGREE = 10


@dataclass(frozen=True)
class IntPolynomial:
    """Integer polynomial, constant term first."""

    coeffs: tuple[int, ...]

    def __post_init__(self):
        c = [int(x) for x in self.coeffs]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c) if c else (0,))

    @property
    def degree(self) -> int:
        if self.coeffs == (0,):
            return -1
        return len(self.coeffs) - 1

    @property
    def is_monic(self) -> bool:
        return self.coeffs[-1] == 1

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self) -> IntPolynomial:
        return IntPolynomial(tuple(k * c for k, c in enumerate(self.coeffs))[1:] or (0,))

    def __str__(self) -> str:
        terms = []
        for k in range(self.degree, -1, -1):
            c = self.coeffs[k]
            if c == 0:
                continue
            mono = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            if mono and abs(c) == 1:
                coef = "-" if c < 0 else "+"
                terms.append(f"{coef} {mono}")
            else:
                terms.append(f"{'-' if c < 0 else '+'} {abs(c)}{mono}")
        s = " ".join(terms) or "0"
        return s[2:] if s.startswith("+ ") else "-" + s[2:]


def _poly_gcd_rational(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    def trim(p):
        p = list(p)
        while p and p[-1] == 0:
            p.pop()
        return p

    a, b = trim(a), trim(b)
    while b:
        r = list(a)
        while len(r) >= len(b) and r:
            q = r[-1] / b[-1]
            shift = len(r) - len(b)
            for i, bc in enumerate(b):
                r[shift + i] -= q * bc
            r = trim(r)
        a, b = b, r
    return a


@dataclass(frozen=True, eq=False)
class FieldContext:
    """Q(beta) = Q[x]/(p) for a monic squarefree integer polynomial p."""

    poly: IntPolynomial

    def __eq__(self, other):
        return isinstance(other, FieldContext) and self.poly == other.poly

    def __hash__(self):
        return hash(self.poly)

    @property
    def n(self) -> int:
        return self.poly.degree

    @property
    def unimodular(self) -> bool:
        return abs(self.poly.coeffs[0]) == 1

    @property
    def constant_term(self) -> int:
        return self.poly.coeffs[0]

    # constructors
    def element(self, num: Iterable[int | Fraction], den: int = 1) -> AlgebraicElement:
        num = list(num)
        if len(num) > self.n:
            return AlgebraicElement.from_poly(self, num, den)
        num = num + [0] * (self.n - len(num))
        fr = [Fraction(c) / den for c in num]
        return AlgebraicElement.from_fractions(self, fr)

    def zero(self) -> AlgebraicElement:
        return AlgebraicElement(self, (0,) * self.n, 1)

    def one(self) -> AlgebraicElement:
        return self.from_int(1)

    def from_int(self, k: int | Fraction) -> AlgebraicElement:
        k = Fraction(k)
        return AlgebraicElement.from_fractions(self, [k] + [Fraction(0)] * (self.n - 1))

    def beta(self) -> AlgebraicElement:
        if self.n == 1:
            return self.from_int(-self.poly.coeffs[0])
        return AlgebraicElement(self, (0, 1) + (0,) * (self.n - 2), 1)

    @cached_property
    def _tail(self) -> tuple[int, ...]:
        # x^n = -sum c_i x^i
        return tuple(-c for c in self.poly.coeffs[:-1])

    def reduce(self, coeffs: Sequence[int]) -> list[int]:
        """Reduce an integer coefficient list modulo p (exact)."""
        r = list(coeffs)
        n = self.n
        tail = self._tail
        for k in range(len(r) - 1, n - 1, -1):
            t = r[k]
            if t:
                base = k - n
                for i in range(n):
                    r[base + i] += t * tail[i]
            r[k] = 0
        r = r[:n]
        return r + [0] * (n - len(r))

    def times_beta(self, vec: Sequence[int]) -> tuple[int, ...]:
        """Coefficient vector of beta * x for an integer coefficient vector x."""
        n = self.n
        top = vec[n - 1]
        out = [0] + list(vec[: n - 1])
        if top:
            tail = self._tail
            for i in range(n):
                out[i] += top * tail[i]
        return tuple(out)

    def times_beta_power(self, vec: Sequence[int], k: int) -> tuple[int, ...]:
        out = tuple(vec)
        for _ in range(k):
            out = self.times_beta(out)
        return out

    @cached_property
    def companion(self) -> np.ndarray:
        """Integer matrix of multiplication by beta acting on coefficient columns."""
        n = self.n
        m = np.zeros((n, n), dtype=object)
        for k in range(n):
            e = [0] * n
            e[k] = 1
            col = self.times_beta(e)
            for i in range(n):
                m[i, k] = col[i]
        return m

    def __repr__(self):
        return f"FieldContext({self.poly})"


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


@dataclass(frozen=True, eq=False)
class AlgebraicElement:
    """Exact element of Q(beta): ``sum(num[k] beta^k) / den``."""

    field: FieldContext
    num: tuple[int, ...]
    den: int = 1

    def __post_init__(self):
        num = tuple(int(c) for c in self.num)
        den = int(self.den)
        if den == 0:
            raise ZeroDivisionError("zero denominator")
        if den < 0:
            num, den = tuple(-c for c in num), -den
        g = reduce(math.gcd, num, den)
        if g > 1:
            num, den = tuple(c // g for c in num), den // g
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def from_fractions(cls, field: FieldContext, fr: Sequence[Fraction]) -> AlgebraicElement:
        den = reduce(_lcm, (Fraction(f).denominator for f in fr), 1)
        num = tuple(int(Fraction(f) * den) for f in fr)
        return cls(field, num, den)

    @classmethod
    def from_poly(cls, field: FieldContext, coeffs: Sequence[int | Fraction], den: int = 1):
        fr = [Fraction(c) for c in coeffs]
        d = reduce(_lcm, (f.denominator for f in fr), 1)
        ints = [int(f * d) for f in fr]
        return cls(field, tuple(field.reduce(ints)), den * d)

    # structure
    @property
    def n(self) -> int:
        return self.field.n

    @property
    def is_integral(self) -> bool:
        """True when the element lies in Z[beta] (integer power-basis coordinates)."""
        return self.den == 1

    @property
    def is_zero(self) -> bool:
        return not any(self.num)

    def coefficients(self) -> list[Fraction]:
        return [Fraction(c, self.den) for c in self.num]

    def key(self) -> tuple[int, ...]:
        """Hashable exact key; for integral elements this is the coefficient vector."""
        return self.num if self.den == 1 else self.num + (self.den,)

    def __hash__(self):
        return hash((self.num, self.den))

    def __eq__(self, other):
        if isinstance(other, int):
            other = self.field.from_int(other)
        if not isinstance(other, AlgebraicElement):
            return NotImplemented
        return self.field == other.field and self.num == other.num and self.den == other.den

    def _check(self, other) -> AlgebraicElement:
        if isinstance(other, (int, Fraction)):
            return self.field.from_int(other)
        if not isinstance(other, AlgebraicElement):
            raise TypeError(f"cannot combine AlgebraicElement with {type(other).__name__}")
        if other.field != self.field:
            raise ContextMismatch(f"{self.field} vs {other.field}")
        return other

    def __add__(self, other):
        try:
            other = self._check(other)
        except TypeError:
            return NotImplemented
        if self.den == other.den:
            return AlgebraicElement(self.field, tuple(a + b for a, b in zip(self.num, other.num)), self.den)
        d = _lcm(self.den, other.den)
        fa, fb = d // self.den, d // other.den
        return AlgebraicElement(self.field, tuple(a * fa + b * fb for a, b in zip(self.num, other.num)), d)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraicElement(self.field, tuple(-a for a in self.num), self.den)

    def __sub__(self, other):
        try:
            other = self._check(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            other = self._check(other)
        except TypeError:
            return NotImplemented
        a, b = self.num, other.num
        prod = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    prod[i + j] += x * y
        return AlgebraicElement(self.field, tuple(self.field.reduce(prod)), self.den * other.den)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result = self.field.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def multiplication_matrix(self) -> list[list[int]]:
        """Integer matrix (rows x cols = n x n) of x -> num * x, ignoring den."""
        n = self.n
        cols = []
        for k in range(n):
            e = [0] * n
            e[k] = 1
            cols.append((AlgebraicElement(self.field, tuple(e), 1) * AlgebraicElement(self.field, self.num, 1)).num)
        return [[cols[k][i] for k in range(n)] for i in range(n)]

    def inverse(self) -> AlgebraicElement:
        if self.is_zero:
            raise ZeroDivisionError("inverse of zero")
        m = [[Fraction(v) for v in row] for row in self.multiplication_matrix()]
        rhs = [Fraction(0)] * self.n
        rhs[0] = Fraction(self.den)
        sol = _solve_rational(m, rhs)
        return AlgebraicElement.from_fractions(self.field, sol)

    def __truediv__(self, other):
        other = self._check(other)
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self._check(other) * self.inverse()

    def __float__(self):
        raise TypeError("AlgebraicElement has no canonical real value; use an embedding")

    def __str__(self):
        """Readable form that parse_beta_expression accepts back."""
        terms = []
        for k, c in enumerate(self.num):
            if not c:
                continue
            mono = "" if k == 0 else ("beta" if k == 1 else f"beta^{k}")
            mag = abs(c)
            t = str(mag) if not mono else (mono if mag == 1 else f"{mag}*{mono}")
            terms.append(("-" if c < 0 else "+", t))
        if not terms:
            return "0"
        body = ("-" if terms[0][0] == "-" else "") + terms[0][1]
        for sign, t in terms[1:]:
            body += f" {sign} {t}"
        return body if self.den == 1 else f"({body})/{self.den}"

    def __repr__(self):
        return f"<{self}>"


def _solve_rational(m: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    n = len(m)
    a = [row[:] + [rhs[i]] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular multiplication matrix (element is a zero divisor)")
        a[col], a[piv] = a[piv], a[col]
        pv = a[col][col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / pv
                for c in range(col, n + 1):
                    a[r][c] -= f * a[col][c]
    return [a[i][n] / a[i][i] for i in range(n)]


def field_from_min_poly(p: IntPolynomial | Sequence[int]) -> FieldContext:
    if not isinstance(p, IntPolynomial):
        p = IntPolynomial(tuple(p))
    if p.degree < 1 or not p.is_monic:
        raise NonMonic(f"{p} must be monic of degree >= 1")
    g = _poly_gcd_rational([Fraction(c) for c in p.coeffs], [Fraction(c) for c in p.derivative().coeffs])
    if len(g) > 1:
        raise NotSquarefree(f"{p} has a repeated factor")
    return FieldContext(p)


def mul(a: AlgebraicElement, b: AlgebraicElement) -> AlgebraicElement:
    if a.field != b.field:
        raise ContextMismatch(f"{a.field} vs {b.field}")
    return a * b


def inverse_of_beta(ctx: FieldContext) -> AlgebraicElement:
    """beta^{-1} as an element of Z[beta]; only exists for unimodular p."""
    if not ctx.unimodular:
        raise NotUnimodular(f"|p(0)| = {abs(ctx.constant_term)} so beta^-1 is not in Z[beta]")
    c = ctx.poly.coeffs
    # beta * (beta^{n-1} + c_{n-1} beta^{n-2} + ... + c_1) = -c_0
    q = list(c[1:])
    inv = [x * (-c[0]) for x in q]  # divide by -c_0 = +-1
    return AlgebraicElement(ctx, tuple(inv), 1)


# ---------------------------------------------------------------------------
# roots and embeddings


@dataclass(frozen=True)
class EmbeddingData:
    """Roots of p packaged for the cut-and-project construction.

    ``real_roots`` ascend; ``complex_roots`` hold one positive-imaginary
    representative per conjugate pair.  ``beta_index`` points into
    ``real_roots``.
    """

    poly: IntPolynomial
    real_roots: tuple[float, ...]
    complex_roots: tuple[complex, ...]
    beta_index: int
    residual: float
    iterations: int
    precise_real: tuple = field(default=(), repr=False, compare=False)
    precise_complex: tuple = field(default=(), repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.poly.degree

    @property
    def beta(self) -> float:
        return self.real_roots[self.beta_index]

    @property
    def m(self) -> int:
        return 1

    @property
    def e(self) -> int:
        return len(self.real_roots)

    @property
    def f(self) -> int:
        return len(self.complex_roots)

    @property
    def internal_dim(self) -> int:
        return self.n - self.m

    @property
    def roots(self) -> tuple[complex, ...]:
        """All n roots: reals first, then each representative followed by its conjugate."""
        out = [complex(r) for r in self.real_roots]
        for z in self.complex_roots:
            out += [z, z.conjugate()]
        return tuple(out)

    @property
    def conjugate_real_roots(self) -> tuple[float, ...]:
        return tuple(r for i, r in enumerate(self.real_roots) if i != self.beta_index)

    def conjugate_moduli(self) -> list[float]:
        return [abs(r) for r in self.conjugate_real_roots] + [abs(z) for z in self.complex_roots]


def _durand_kerner(coeffs: Sequence[int], tol: float, max_iter: int) -> tuple[np.ndarray, int]:
    n = len(coeffs) - 1
    lead = coeffs[-1]
    a = np.array([c / lead for c in coeffs], dtype=complex)
    radius = 1.0 + max(abs(c) for c in a[:-1])
    # fixed angular offset avoids symmetric starts; no RNG involved
    z = radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))

    def peval(x):
        acc = np.zeros_like(x)
        for c in a[::-1]:
            acc = acc * x + c
        return acc

    for it in range(1, max_iter + 1):
        diffs = z[:, None] - z[None, :]
        np.fill_diagonal(diffs, 1.0)
        step = peval(z) / np.prod(diffs, axis=1)
        z = z - step
        if np.max(np.abs(step)) < tol * max(1.0, np.max(np.abs(z))):
            return z, it
    raise NoConvergence(f"Durand-Kerner did not converge in {max_iter} iterations")


def _polish(p: IntPolynomial, z: complex, steps: int = 4) -> complex:
    dp = p.derivative()
    for _ in range(steps):
        d = dp(z)
        if d == 0:
            break
        z = z - p(z) / d
    return z


def find_roots(
    p: IntPolynomial | Sequence[int],
    tol: float = 1e-13,
    max_iter: int = 500,
    perron: float | None = None,
    dps: int = 60,
) -> EmbeddingData:
    """All roots of p by simultaneous (Durand-Kerner) iteration.

    Roots are polished with a few Newton steps and also refined in mpmath so
    star images of large coefficient vectors stay accurate.
    """
    if not isinstance(p, IntPolynomial):
        p = IntPolynomial(tuple(p))
    n = p.degree
    if n < 1:
        raise NonMonic("constant polynomial has no roots")
    if n == 1:
        z = np.array([complex(-p.coeffs[0] / p.coeffs[1])])
        iters = 0
    else:
        z, iters = _durand_kerner(p.coeffs, tol, max_iter)
    z = [_polish(p, complex(x)) for x in z]

    imag_tol = 1e-9
    reals: list[float] = []
    comps: list[complex] = []
    used = [False] * n
    for i, x in enumerate(z):
        if used[i]:
            continue
        if abs(x.imag) <= imag_tol * max(1.0, abs(x)):
            used[i] = True
            reals.append(x.real)
            continue
        j = min(
            (k for k in range(n) if not used[k] and k != i),
            key=lambda k: abs(z[k] - x.conjugate()),
            default=None,
        )
        if j is None or abs(z[j] - x.conjugate()) > 1e-6 * max(1.0, abs(x)):
            raise NoConvergence(f"root {x} has no conjugate partner")
        used[i] = used[j] = True
        w = 0.5 * (x + z[j].conjugate())
        comps.append(complex(w.real, abs(w.imag)))
    reals.sort()
    comps.sort(key=lambda w: (w.real, w.imag))
    # Newton in real arithmetic for real roots
    reals = [_polish(p, r).real for r in reals]

    with mpmath.workdps(dps):
        mp_coeffs = [mpmath.mpf(c) for c in reversed(p.coeffs)]

        def refine(x0):
            x = mpmath.mpc(x0)
            for _ in range(8):
                fx = mpmath.polyval(mp_coeffs, x)
                dfx = mpmath.polyval(mp_coeffs, x, derivative=True)[1]
                if dfx == 0:
                    break
                x = x - fx / dfx
            return x

        precise_real = tuple(mpmath.re(refine(r)) for r in reals)
        precise_complex = tuple(refine(w) for w in comps)

    all_roots = reals + [w for c in comps for w in (c, c.conjugate())]
    residual = max(abs(p(r)) for r in all_roots)
    if residual > max(1e-12, 1e3 * tol) * max(1.0, max(abs(r) for r in all_roots)) ** n:
        raise NoConvergence(f"residual {residual:g} too large")

    if not reals:
        raise NoConvergence("no real root available for the expansion factor")
    if perron is None:
        beta_index = max(range(len(reals)), key=lambda i: reals[i])
    else:
        beta_index = min(range(len(reals)), key=lambda i: abs(reals[i] - perron))
        if abs(reals[beta_index] - perron) > 1e-7 * max(1.0, perron):
            raise NoConvergence(f"no root of {p} matches the Perron value {perron}")
    return EmbeddingData(
        poly=p,
        real_roots=tuple(reals),
        complex_roots=tuple(comps),
        beta_index=beta_index,
        residual=float(residual),
        iterations=iters,
        precise_real=precise_real,
        precise_complex=precise_complex,
    )


def galois_embed(a: AlgebraicElement, emb: EmbeddingData, which: int) -> complex:
    """Value of ``a`` under the embedding beta -> emb.roots[which]."""
    roots = emb.roots
    if not 0 <= which < len(roots):
        raise IndexError(f"root index {which} out of range 0..{len(roots) - 1}")
    if max((abs(c) for c in a.num), default=0) < 2**40:
        z = roots[which]
        acc = 0j
        for c in reversed(a.num):
            acc = acc * z + c
        return acc / a.den
    precise = list(emb.precise_real) + [w for c in emb.precise_complex for w in (c, mpmath.conj(c))]
    with mpmath.workdps(60):
        val = mpmath.polyval([mpmath.mpf(c) for c in reversed(a.num)], precise[which]) / a.den
        return complex(val)


@dataclass(frozen=True)
class PisotVerdict:
    holds: bool
    margin: float
    max_conjugate_modulus: float

    def __bool__(self):
        return self.holds


def pisot_family_check(emb: EmbeddingData, tol: float = 1e-9) -> PisotVerdict:
    """For d = 1 and a single expansion: beta real > 1 and all other roots inside the unit disk."""
    moduli = emb.conjugate_moduli()
    top = max(moduli, default=0.0)
    if any(abs(mod - 1.0) < tol for mod in moduli):
        raise Inconclusive(f"a conjugate has modulus within {tol} of 1")
    holds = emb.beta > 1.0 and top < 1.0
    return PisotVerdict(holds=holds, margin=1.0 - top, max_conjugate_modulus=top)


# ---------------------------------------------------------------------------
# minimal polynomial of the Perron value


def characteristic_polynomial(S) -> IntPolynomial:
    import sympy

    x = sympy.Symbol("x")
    cp = sympy.Matrix(np.asarray(S, dtype=object).tolist()).charpoly(x)
    return IntPolynomial(tuple(int(c) for c in reversed(cp.all_coeffs())))


def _sympy_poly(p: IntPolynomial):
    import sympy

    x = sympy.Symbol("x")
    return sympy.Poly(list(reversed(p.coeffs)), x, domain="ZZ")


def _is_irreducible(p: IntPolynomial) -> bool:
    return _sympy_poly(p).is_irreducible


def minimal_polynomial_of_perron(
    S, perron: float, override: Sequence[int] | None = None, tol: float = 1e-8
) -> IntPolynomial:
    """Irreducible factor of char(S) vanishing at the Perron value.

    An explicit ``override`` is accepted after checking that it is monic,
    irreducible, divides char(S) exactly and vanishes at the Perron value.
    """
    import sympy

    char = characteristic_polynomial(S)
    cp = _sympy_poly(char)
    if override is not None:
        p = IntPolynomial(tuple(override))
        if p.degree < 1 or not p.is_monic:
            raise NonMonic(f"min_poly override {p} is not monic")
        q, r = cp.div(_sympy_poly(p))
        if not r.is_zero:
            raise NoConvergence(f"min_poly override {p} does not divide char(S) = {char}")
        if abs(p(perron)) > tol * max(1.0, perron) ** p.degree:
            raise NoConvergence(f"min_poly override {p} does not vanish at Perron value {perron}")
        if not _is_irreducible(p):
            raise NotSquarefree(f"min_poly override {p} is reducible")
        return p

    sqf = sympy.Poly(sympy.quo(cp, sympy.gcd(cp, cp.diff())), cp.gen)
    if sqf.degree() > MAX_FACTOR_DEGREE * 4:
        raise SizeLimit(f"characteristic polynomial degree {sqf.degree()} too large")
    _, factors = sympy.factor_list(sqf)
    best = None
    for fac, _mult in factors:
        coeffs = [int(c) for c in reversed(fac.all_coeffs())]
        if coeffs[-1] < 0:
            coeffs = [-c for c in coeffs]
        cand = IntPolynomial(tuple(coeffs))
        val = abs(float(cand(perron)))
        if best is None or val < best[0]:
            best = (val, cand)
    val, p = best
    if val > tol * max(1.0, perron) ** p.degree:
        raise NoConvergence(f"no factor of {char} vanishes at {perron}")
    if p.degree > MAX_FACTOR_DEGREE:
        raise SizeLimit(f"minimal polynomial degree {p.degree} exceeds {MAX_FACTOR_DEGREE}")
    if not p.is_monic:
        raise NonMonic(f"{p} is not monic; Perron value is not an algebraic integer")
    return p
