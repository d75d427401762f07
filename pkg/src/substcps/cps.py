"""Cut-and-project scheme built from the Galois conjugates of the expansion factor.

Internal coordinates: one real axis per real conjugate (ascending order), then
one (Re, Im) plane per complex pair.  Multiplication by beta acts on the
internal space as the block-diagonal matrix D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.spatial import cKDTree

from .algebra import AlgebraicElement, EmbeddingData, FieldContext
from .errors import DegenerateLattice, EmptyInternalSpace, NotUnimodular, SizeLimit

__all__ = [
    "CPSContext",
    "EllipsoidWindow",
    "build_cps",
    "star_map",
    "star_many",
    "lattice_check",
    "density_probe",
    "e_delta_membership",
    "scaled_e_delta_window",
    "default_delta",
    "enumerate_lattice",
]

# beyond this coefficient size the float dot product loses the tiny star images
_PRECISE_ABOVE = 2**20


@dataclass(frozen=True, eq=False)
class CPSContext:
    field: FieldContext
    embedding: EmbeddingData
    D: np.ndarray
    star_basis: np.ndarray  # row k = star image of beta^k
    lattice_basis: np.ndarray  # row k = (beta^k, star image of beta^k)
    determinant: float

    @property
    def internal_dim(self) -> int:
        return self.D.shape[0]

    @property
    def n(self) -> int:
        return self.field.n

    @property
    def beta(self) -> float:
        return self.embedding.beta

    @property
    def unimodular(self) -> bool:
        return self.field.unimodular

    @property
    def contraction(self) -> float:
        """Operator norm of D (D is normal, so this is its spectral radius)."""
        return float(np.linalg.norm(self.D, 2))

    @property
    def det_D(self) -> float:
        return float(np.linalg.det(self.D))

    def physical_many(self, coeffs: np.ndarray, den: int = 1) -> np.ndarray:
        powers = self.lattice_basis[:, 0]
        return (np.asarray(coeffs).astype(float) @ powers) / den

    def to_dict(self) -> dict:
        emb = self.embedding
        return {
            "min_poly": list(self.field.poly.coeffs),
            "beta": emb.beta,
            "conjugate_real_roots": list(emb.conjugate_real_roots),
            "conjugate_complex_roots": [[z.real, z.imag] for z in emb.complex_roots],
            "internal_dim": self.internal_dim,
            "D": self.D.tolist(),
            "contraction": self.contraction,
            "lattice_determinant": self.determinant,
            "unimodular": self.unimodular,
        }


def _internal_layout(emb: EmbeddingData) -> tuple[list, list]:
    reals = [i for i in range(len(emb.real_roots)) if i != emb.beta_index]
    return reals, list(range(len(emb.complex_roots)))


def build_cps(ctx: FieldContext, emb: EmbeddingData) -> CPSContext:
    if emb.n != ctx.n:
        raise ValueError("embedding degree does not match the field")
    d = emb.internal_dim
    if d < 1:
        raise EmptyInternalSpace("empty internal space: the expansion factor has no conjugates")
    reals, comps = _internal_layout(emb)
    D = np.zeros((d, d))
    pos = 0
    for i in reals:
        D[pos, pos] = emb.real_roots[i]
        pos += 1
    for k in comps:
        z = emb.complex_roots[k]
        D[pos : pos + 2, pos : pos + 2] = [[z.real, -z.imag], [z.imag, z.real]]
        pos += 2

    n = ctx.n
    star = np.zeros((n, d))
    with mpmath.workdps(40):
        for k in range(n):
            pos = 0
            for i in reals:
                star[k, pos] = float(emb.precise_real[i] ** k) if emb.precise_real else emb.real_roots[i] ** k
                pos += 1
            for j in comps:
                w = emb.precise_complex[j] ** k if emb.precise_complex else emb.complex_roots[j] ** k
                star[k, pos] = float(mpmath.re(w))
                star[k, pos + 1] = float(mpmath.im(w))
                pos += 2
    phys = np.array([emb.beta**k for k in range(n)])
    basis = np.column_stack([phys, star])
    det = abs(float(np.linalg.det(basis)))
    cps = CPSContext(field=ctx, embedding=emb, D=D, star_basis=star, lattice_basis=basis, determinant=det)
    lattice_check(cps)
    return cps


def star_map(x: AlgebraicElement, cps: CPSContext) -> np.ndarray:
    """Star image of a field element (linear over Q)."""
    if x.field != cps.field:
        from .errors import ContextMismatch

        raise ContextMismatch("element belongs to a different field")
    if max((abs(c) for c in x.num), default=0) < _PRECISE_ABOVE:
        return (np.array(x.num, dtype=float) @ cps.star_basis) / x.den
    emb = cps.embedding
    reals, comps = _internal_layout(emb)
    out = []
    with mpmath.workdps(60):
        coeffs = [mpmath.mpf(c) for c in reversed(x.num)]
        for i in reals:
            out.append(float(mpmath.polyval(coeffs, emb.precise_real[i]) / x.den))
        for j in comps:
            w = mpmath.polyval(coeffs, emb.precise_complex[j]) / x.den
            out += [float(mpmath.re(w)), float(mpmath.im(w))]
    return np.array(out)


def star_many(coeffs: np.ndarray, cps: CPSContext, den: int = 1) -> np.ndarray:
    """Star images of many coefficient rows at once (float arithmetic)."""
    c = np.asarray(coeffs)
    if c.size == 0:
        return np.zeros((0, cps.internal_dim))
    return (c.astype(float) @ cps.star_basis) / den


def lattice_check(cps: CPSContext, tol: float = 1e-9) -> float:
    if not cps.determinant > tol:
        raise DegenerateLattice(f"lattice determinant {cps.determinant:g} is not above {tol:g}")
    return cps.determinant


def density_probe(
    cps: CPSContext,
    samples: int = 100,
    eps: float = 1e-2,
    seed: int = 0,
    per_ball: float = 8.0,
    max_points: int = 2_000_000,
) -> float:
    """Fraction of random targets in the unit ball within eps of the star image of some x in Z[beta].

    Candidates are the lattice points with star image near the unit ball and
    |x| <= R, where R is chosen so that an eps-ball expects ``per_ball`` hits.
    """
    d = cps.internal_dim
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((samples, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    targets = g * rng.random(samples)[:, None] ** (1.0 / d)

    r = min(eps, 1.0)
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    radius = per_ball * cps.determinant / (2 * ball * r**d)
    expected = 2 * radius * ball * (1 + r) ** d / cps.determinant
    if expected > max_points:
        radius *= max_points / expected
    ext = 1.0 + r
    pts = enumerate_lattice(cps, radius, [-ext] * d, [ext] * d)
    if len(pts) == 0:
        return 0.0
    tree = cKDTree(star_many(pts, cps))
    dist, _ = tree.query(targets)
    return float(np.mean(dist <= eps))


def e_delta_membership(x: AlgebraicElement, delta: float, cps: CPSContext) -> bool:
    if not x.is_integral:
        raise ValueError("E_delta membership is defined for elements of Z[beta] only")
    return bool(np.linalg.norm(star_map(x, cps)) < delta)


@dataclass(frozen=True, eq=False)
class EllipsoidWindow:
    """The set {y : y^T Q y < 1} = D^k B_delta."""

    Q: np.ndarray
    k: int
    delta: float
    semi_axes: np.ndarray

    def contains(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(y)
        return np.einsum("ij,jk,ik->i", y, self.Q, y) < 1.0


def scaled_e_delta_window(delta: float, k: int, cps: CPSContext) -> EllipsoidWindow:
    if not cps.unimodular:
        raise NotUnimodular("beta^k Z[beta] differs from Z[beta] for a non-unit expansion factor")
    A = np.linalg.matrix_power(cps.D, k)
    Ainv = np.linalg.inv(A)
    Q = Ainv.T @ Ainv / delta**2
    axes = np.linalg.svd(A, compute_uv=False) * delta
    return EllipsoidWindow(Q=Q, k=k, delta=delta, semi_axes=np.sort(axes)[::-1])


def default_delta(xi_coeffs: np.ndarray, cps: CPSContext, den: int = 1, headroom: float = 1.05) -> float:
    """Smallest empirical delta with Xi inside E_delta, times a small headroom."""
    s = star_many(xi_coeffs, cps, den)
    if len(s) == 0:
        return 0.0
    return headroom * float(np.max(np.linalg.norm(s, axis=1)))


def _reduced_transform(G: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Unimodular T with the rows of T @ G LLL-reduced after scaling the box to a cube."""
    from sympy import ZZ
    from sympy.polys.matrices import DomainMatrix

    n = G.shape[0]
    if n == 1:
        return np.eye(1, dtype=np.int64)
    scaled = G / np.maximum(widths, 1e-12)
    scaled = scaled / np.max(np.abs(scaled))
    ints = np.rint(scaled * 2.0**40).astype(np.int64)
    M = DomainMatrix([[ZZ(int(v)) for v in row] for row in ints], (n, n), ZZ)
    try:
        _, T = M.lll_transform()
    except Exception:  # singular after rounding: fall back to the input basis
        return np.eye(n, dtype=np.int64)
    return np.array(T.to_Matrix().tolist(), dtype=np.int64)


def enumerate_lattice(
    cps: CPSContext,
    radius: float,
    lo: Sequence[float],
    hi: Sequence[float],
    basis: np.ndarray | None = None,
    keep: Callable[[np.ndarray], np.ndarray] | None = None,
    max_grid: int = 20_000_000,
) -> np.ndarray:
    """Integer coefficient vectors x with |x| <= radius and star image in the box [lo, hi].

    ``basis`` (columns) restricts to a sublattice of Z[beta]; ``keep`` is an
    optional extra predicate on star images.  Rows are returned sorted by
    physical position.
    """
    n = cps.n
    H = np.eye(n, dtype=np.int64) if basis is None else np.asarray(basis, dtype=np.int64)
    blo = np.concatenate([[-radius], np.asarray(lo, float)])
    bhi = np.concatenate([[radius], np.asarray(hi, float)])
    H = H @ _reduced_transform(H.T.astype(float) @ cps.lattice_basis, bhi - blo).T
    G = H.T.astype(float) @ cps.lattice_basis  # row k = image of the k-th basis vector
    Ginv = np.linalg.inv(G)
    # bounding box of t = y Ginv over the box y in [blo, bhi]
    pos, neg = np.clip(Ginv, 0, None), np.clip(Ginv, None, 0)
    tmin = np.floor(blo @ pos + bhi @ neg - 1e-9).astype(np.int64)
    tmax = np.ceil(bhi @ pos + blo @ neg + 1e-9).astype(np.int64)
    spans = tmax - tmin + 1
    solve = int(np.argmax(spans))
    others = [k for k in range(n) if k != solve]
    size = int(np.prod(spans[others])) if others else 1
    if size > max_grid:
        raise SizeLimit(f"lattice enumeration grid of {size} exceeds {max_grid}")

    if others:
        axes = [np.arange(tmin[k], tmax[k] + 1) for k in others]
        grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(others), -1).T
    else:
        grid = np.zeros((1, 0), dtype=np.int64)
    partial = grid.astype(float) @ G[others] if others else np.zeros((1, G.shape[1]))
    g = G[solve]
    low = np.full(len(grid), -np.inf)
    high = np.full(len(grid), np.inf)
    slack = 1e-9 * (1 + radius)
    for j in range(G.shape[1]):
        if abs(g[j]) < 1e-300:
            ok = (partial[:, j] >= blo[j] - slack) & (partial[:, j] <= bhi[j] + slack)
            high[~ok] = -np.inf
            continue
        a = (blo[j] - slack - partial[:, j]) / g[j]
        b = (bhi[j] + slack - partial[:, j]) / g[j]
        low = np.maximum(low, np.minimum(a, b))
        high = np.minimum(high, np.maximum(a, b))
    kmin = np.ceil(low)
    kmax = np.floor(high)
    cnt = np.where(kmax >= kmin, kmax - kmin + 1, 0).astype(np.int64)
    total = int(cnt.sum())
    if total == 0:
        return np.zeros((0, n), dtype=np.int64)
    rows = np.repeat(np.arange(len(grid)), cnt)
    offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    t = np.zeros((total, n), dtype=np.int64)
    if others:
        t[:, others] = grid[rows]
    t[:, solve] = kmin[rows].astype(np.int64) + offs
    coeffs = t @ H.T
    y = coeffs.astype(float) @ cps.lattice_basis
    ok = np.abs(y[:, 0]) <= radius
    ok &= np.all((y[:, 1:] >= blo[1:]) & (y[:, 1:] <= bhi[1:]), axis=1)
    if keep is not None:
        ok &= keep(y[:, 1:])
    coeffs, y = coeffs[ok], y[ok]
    order = np.argsort(y[:, 0], kind="stable")
    return coeffs[order]
