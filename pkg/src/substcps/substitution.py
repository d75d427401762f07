"""Symbolic substitutions: parsing, substitution matrix, tile lengths and digit sets.

Control points are the left endpoints of the interval tiles, so the digit set
``D[i][j]`` is the list of prefix-sum offsets of the occurrences of letter ``i``
inside ``rule(j)``.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Any, Mapping, Sequence

import jsonschema
import numpy as np

from .algebra import (
    AlgebraicElement,
    EmbeddingData,
    FieldContext,
    IntPolynomial,
    field_from_min_poly,
    find_roots,
    minimal_polynomial_of_perron,
)
from .errors import (
    GapOrOverlap,
    NoExactEigenvector,
    NotPrimitive,
    SchemaError,
    SizeLimit,
)

__all__ = [
    "SubstitutionSpec",
    "SubMatrix",
    "DigitSets",
    "SubstitutionSystem",
    "parse_spec",
    "load_spec",
    "build_matrix",
    "check_primitive",
    "derive_lengths",
    "derive_digit_sets",
    "validate_tile_equation",
    "iterate_digit_sets",
    "parse_beta_expression",
    "build_system",
    "real_value",
]

DEFAULT_PARAMS = {
    "radius": None,
    "delta": None,
    "m_max": 8,
    "grid_depth": None,
    "tol": 1e-9,
}


@dataclass(frozen=True)
class SubstitutionSpec:
    letters: tuple[str, ...]
    rules: Mapping[str, tuple[str, ...]]
    lengths: Mapping[str, str] | None = None
    min_poly: tuple[int, ...] | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    name: str = ""

    @property
    def kappa(self) -> int:
        return len(self.letters)

    def index(self, letter: str) -> int:
        return self.letters.index(letter)

    def rule_indices(self, j: int) -> tuple[int, ...]:
        return tuple(self.letters.index(c) for c in self.rules[self.letters[j]])

    def param(self, key: str):
        return self.params.get(key, DEFAULT_PARAMS.get(key))

    def to_dict(self) -> dict:
        single = all(len(a) == 1 for a in self.letters)
        d: dict[str, Any] = {
            "format": 1,
            "letters": list(self.letters),
            "rules": {a: ("".join(w) if single else list(w)) for a, w in self.rules.items()},
        }
        if self.name:
            d["name"] = self.name
        if self.lengths is not None:
            d["lengths"] = dict(self.lengths)
        if self.min_poly is not None:
            d["min_poly"] = list(self.min_poly)
        if self.params:
            d["params"] = dict(self.params)
        return d


def _schema() -> dict:
    text = resources.files("substcps").joinpath("data/substitution.schema.json").read_text()
    return json.loads(text)


def parse_spec(doc: Mapping[str, Any] | str) -> SubstitutionSpec:
    """Validate a spec document (dict or JSON text) and normalize it."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", f"line {exc.lineno}") from None
    validator = jsonschema.Draft7Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        loc = "$" + "".join(f"[{p!r}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
        raise SchemaError(err.message, loc)

    letters = tuple(doc["letters"])
    single = all(len(a) == 1 for a in letters)
    rules: dict[str, tuple[str, ...]] = {}
    for key, word in doc["rules"].items():
        if key not in letters:
            raise SchemaError(f"rule for unknown letter {key!r}", f"$.rules.{key}")
        if isinstance(word, str):
            toks = list(word.replace(" ", "")) if single else word.split()
        else:
            toks = list(word)
        for t in toks:
            if t not in letters:
                raise SchemaError(f"unknown letter {t!r} in rule", f"$.rules.{key}")
        if not toks:
            raise SchemaError("empty rule", f"$.rules.{key}")
        rules[key] = tuple(toks)
    for a in letters:
        if a not in rules:
            raise SchemaError(f"missing rule for letter {a!r}", "$.rules")
    used = {t for w in rules.values() for t in w}
    for a in letters:
        if a not in used:
            raise SchemaError(f"letter {a!r} never occurs in any rule", "$.rules")

    lengths = None
    if "lengths" in doc:
        lengths = {k: str(v) for k, v in doc["lengths"].items()}
        if set(lengths) != set(letters):
            raise SchemaError("lengths must be given for every letter and only those", "$.lengths")
    min_poly = tuple(doc["min_poly"]) if "min_poly" in doc else None
    return SubstitutionSpec(
        letters=letters,
        rules=rules,
        lengths=lengths,
        min_poly=min_poly,
        params=dict(doc.get("params", {})),
        name=doc.get("name", ""),
    )


def load_spec(path) -> SubstitutionSpec:
    with open(path) as fh:
        return parse_spec(fh.read())


# ---------------------------------------------------------------------------
# substitution matrix


@dataclass(frozen=True)
class SubMatrix:
    S: np.ndarray
    perron_value: float
    perron_left: np.ndarray
    perron_right: np.ndarray

    @property
    def kappa(self) -> int:
        return self.S.shape[0]


def _power_iteration(A: np.ndarray, tol: float = 1e-13, max_iter: int = 100_000):
    # iterate on A + I: same eigenvectors, no periodicity for irreducible A
    B = A.astype(float) + np.eye(A.shape[0])
    v = np.ones(A.shape[0]) / A.shape[0]
    lam = 0.0
    for _ in range(max_iter):
        w = B @ v
        new_lam = w.sum()
        w = w / new_lam
        if np.max(np.abs(w - v)) < tol and abs(new_lam - lam) < tol * new_lam:
            v, lam = w, new_lam
            break
        v, lam = w, new_lam
    return lam - 1.0, v


def build_matrix(spec: SubstitutionSpec) -> SubMatrix:
    k = spec.kappa
    S = np.zeros((k, k), dtype=np.int64)
    for j in range(k):
        for i in spec.rule_indices(j):
            S[i, j] += 1
    check_primitive(S)  # before the power iteration, which crawls on reducible matrices
    lam_r, right = _power_iteration(S)
    lam_l, left = _power_iteration(S.T)
    return SubMatrix(S=S, perron_value=float(0.5 * (lam_r + lam_l)), perron_left=left, perron_right=right)


def check_primitive(S: SubMatrix | np.ndarray) -> int:
    """Smallest l with S^l > 0 entrywise, searched up to Wielandt's bound."""
    A = (np.asarray(S.S if isinstance(S, SubMatrix) else S) > 0).astype(np.int64)
    k = A.shape[0]
    bound = k * k - 2 * k + 2
    P = A.copy()
    for ell in range(1, bound + 1):
        if P.min() > 0:
            return ell
        P = ((P @ A) > 0).astype(np.int64)
    raise NotPrimitive(f"no power up to {bound} of the substitution matrix is positive")


# ---------------------------------------------------------------------------
# exact lengths


def parse_beta_expression(text: str | int, ctx: FieldContext) -> AlgebraicElement:
    """Evaluate a polynomial expression in ``beta`` with rational coefficients exactly."""
    src = str(text).replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise SchemaError(f"cannot parse length expression {text!r}: {exc.msg}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            return ctx.from_int(node.value)
        if isinstance(node, ast.Name) and node.id == "beta":
            return ctx.beta()
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                    raise SchemaError(f"exponent must be an integer literal in {text!r}")
                return ev(node.left) ** node.right.value
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                return a / b
        raise SchemaError(f"unsupported construct in length expression {text!r}")

    return ev(tree)


def real_value(a: AlgebraicElement, beta: float) -> float:
    acc = 0.0
    for c in reversed(a.num):
        acc = acc * beta + c
    return acc / a.den


def _nullspace_vector(A: list[list[AlgebraicElement]], ctx: FieldContext) -> list[AlgebraicElement]:
    rows, cols = len(A), len(A[0])
    M = [row[:] for row in A]
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if not M[i][c].is_zero), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = M[r][c].inverse()
        M[r] = [x * inv for x in M[r]]
        for i in range(rows):
            if i != r and not M[i][c].is_zero:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in pivots]
    if len(free) != 1:
        raise NoExactEigenvector(f"eigenspace has dimension {len(free)}, expected 1")
    f = free[0]
    x = [ctx.zero() for _ in range(cols)]
    x[f] = ctx.one()
    for i, c in enumerate(pivots):
        x[c] = -M[i][f]
    return x


def derive_lengths(
    spec: SubstitutionSpec, sub: SubMatrix, ctx: FieldContext
) -> tuple[AlgebraicElement, ...]:
    """Exact tile lengths l with beta * l_j = sum_i S(i,j) l_i."""
    k = spec.kappa
    S = sub.S
    beta = ctx.beta()
    beta_val = sub.perron_value

    def satisfies(ell):
        return all(
            beta * ell[j] == sum((int(S[i, j]) * ell[i] for i in range(k)), ctx.zero()) for j in range(k)
        )

    if spec.lengths is not None:
        ell = tuple(parse_beta_expression(spec.lengths[a], ctx) for a in spec.letters)
        if not satisfies(ell):
            raise NoExactEigenvector("length override does not satisfy beta*l_j = sum_i S(i,j) l_i exactly")
        if any(real_value(x, beta_val) <= 0 for x in ell):
            raise NoExactEigenvector("length override has a non-positive length")
        return ell

    A = [[(beta if i == j else ctx.zero()) - int(S[j, i]) for j in range(k)] for i in range(k)]
    vec = _nullspace_vector(A, ctx)
    last = spec.letters.index(max(spec.letters))
    if vec[last].is_zero:
        raise NoExactEigenvector("eigenvector vanishes at the normalizing letter")
    inv = vec[last].inverse()
    vec = [x * inv for x in vec]
    den = 1
    for x in vec:
        den = den * x.den // _gcd(den, x.den)
    vec = [x * den for x in vec]
    if any(real_value(x, beta_val) <= 0 for x in vec):
        raise NoExactEigenvector("exact eigenvector is not positive at the Perron value")
    if not satisfies(vec):
        raise NoExactEigenvector("Perron value is not a root of the minimal polynomial")
    return tuple(vec)


def _gcd(a: int, b: int) -> int:
    from math import gcd

    return gcd(a, b)


# ---------------------------------------------------------------------------
# digit sets


@dataclass(frozen=True)
class DigitSets:
    """``D[i][j]``: offsets of type-i tiles inside the inflated type-j tile."""

    letters: tuple[str, ...]
    D: tuple[tuple[tuple[AlgebraicElement, ...], ...], ...]

    @property
    def kappa(self) -> int:
        return len(self.letters)

    def counts(self) -> np.ndarray:
        return np.array([[len(self.D[i][j]) for j in range(self.kappa)] for i in range(self.kappa)], dtype=np.int64)

    def total(self) -> int:
        return int(self.counts().sum())


def derive_digit_sets(spec: SubstitutionSpec, lengths: Sequence[AlgebraicElement]) -> DigitSets:
    k = spec.kappa
    ctx = lengths[0].field
    D = [[[] for _ in range(k)] for _ in range(k)]
    for j in range(k):
        pos = ctx.zero()
        for i in spec.rule_indices(j):
            D[i][j].append(pos)
            pos = pos + lengths[i]
    return DigitSets(spec.letters, tuple(tuple(tuple(c) for c in row) for row in D))


def validate_tile_equation(
    digits: DigitSets, lengths: Sequence[AlgebraicElement], beta: AlgebraicElement, beta_value: float
) -> bool:
    """Check that the pieces a + [0, l_i] tile [0, beta * l_j] exactly for every j."""
    k = digits.kappa
    ctx = beta.field
    for j in range(k):
        pieces = [(a, i) for i in range(k) for a in digits.D[i][j]]
        pieces.sort(key=lambda p: real_value(p[0], beta_value))
        pos = ctx.zero()
        for idx, (a, i) in enumerate(pieces):
            if a != pos:
                raise GapOrOverlap(digits.letters[j], idx, f"piece starts at {a!r}, expected {pos!r}")
            pos = a + lengths[i]
        if pos != beta * lengths[j]:
            raise GapOrOverlap(digits.letters[j], len(pieces), f"pieces end at {pos!r}, expected {beta * lengths[j]!r}")
    return True


def iterate_digit_sets(digits: DigitSets, M: int, beta: AlgebraicElement, cap: int = 2_000_000) -> DigitSets:
    """Digit sets of the M-th power of the substitution.

    (D^M)_ij = union over k of D_ik + beta * (D^{M-1})_kj.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    k = digits.kappa
    cur = digits.D
    for _ in range(M - 1):
        total = sum(len(digits.D[i][kk]) * len(cur[kk][j]) for i in range(k) for kk in range(k) for j in range(k))
        if total > cap:
            raise SizeLimit(f"iterated digit sets would hold {total} entries (cap {cap})")
        nxt = []
        for i in range(k):
            row = []
            for j in range(k):
                acc = []
                for kk in range(k):
                    scaled = [beta * b for b in cur[kk][j]]
                    acc.extend(a + sb for a in digits.D[i][kk] for sb in scaled)
                row.append(tuple(acc))
            nxt.append(tuple(row))
        cur = tuple(nxt)
    return DigitSets(digits.letters, cur)


# ---------------------------------------------------------------------------
# bundle


@dataclass(frozen=True)
class SubstitutionSystem:
    """Everything derived from a spec that later stages need."""

    spec: SubstitutionSpec
    matrix: SubMatrix
    primitivity_exponent: int
    min_poly: IntPolynomial
    field: FieldContext
    embedding: EmbeddingData
    lengths: tuple[AlgebraicElement, ...]
    digits: DigitSets

    @property
    def letters(self) -> tuple[str, ...]:
        return self.spec.letters

    @property
    def kappa(self) -> int:
        return self.spec.kappa

    @property
    def beta(self) -> AlgebraicElement:
        return self.field.beta()

    @property
    def beta_value(self) -> float:
        return self.embedding.beta

    def length_values(self) -> np.ndarray:
        return np.array([real_value(x, self.beta_value) for x in self.lengths])


def build_system(spec: SubstitutionSpec) -> SubstitutionSystem:
    sub = build_matrix(spec)
    ell = check_primitive(sub)
    tol = float(spec.param("tol"))
    p = minimal_polynomial_of_perron(sub.S, sub.perron_value, spec.min_poly, tol=max(tol, 1e-8))
    ctx = field_from_min_poly(p)
    emb = find_roots(p, perron=sub.perron_value)
    lengths = derive_lengths(spec, sub, ctx)
    digits = derive_digit_sets(spec, lengths)
    validate_tile_equation(digits, lengths, ctx.beta(), emb.beta)
    return SubstitutionSystem(
        spec=spec,
        matrix=sub,
        primitivity_exponent=ell,
        min_poly=p,
        field=ctx,
        embedding=emb,
        lengths=lengths,
        digits=digits,
    )
