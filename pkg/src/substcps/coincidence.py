"""Finite-radius search for algebraic coincidence and the inclusions that go with it.

Every positive answer here is a certificate about a finite window of the
tiling, never a proof; negative answers only mean nothing was found within
the stated bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import AlgebraicElement, FieldContext
from .cps import CPSContext, enumerate_lattice
from .errors import NotFound, PatchTooSmall
from .pointset import PatchPointSet, ReturnModule

__all__ = [
    "CoincidenceCertificate",
    "InclusionCheck",
    "beta_power_rows",
    "search_coincidence",
    "check_xi_difference_inclusion",
    "find_K_for_E_delta",
    "lattice_to_xi_exponent",
    "required_patch_radius",
]

_INT64_SAFE = 2**62


def beta_power_rows(coeffs: np.ndarray, k: int, ctx: FieldContext) -> np.ndarray:
    """Exact beta^k * x for every coefficient row x (numerators only)."""
    c = np.asarray(coeffs)
    if k == 0 or c.size == 0:
        return c.copy()
    p = ctx.poly.coeffs
    n = ctx.n
    big = max(abs(int(v)) for v in c.ravel()) if c.size else 0
    growth = (1 + max(abs(v) for v in p[:-1])) ** k
    dtype = np.int64 if big * growth < _INT64_SAFE and c.dtype != object else object
    c = c.astype(dtype)
    tail = np.array([-v for v in p[:-1]], dtype=dtype)
    for _ in range(k):
        top = c[:, n - 1 : n].copy()
        nxt = np.zeros_like(c)
        nxt[:, 1:] = c[:, :-1]
        c = nxt + top * tail
    return c


def _rows_to_keys(rows: np.ndarray) -> list[tuple[int, ...]]:
    return [tuple(int(v) for v in r) for r in rows]


def required_patch_radius(beta: float, M: int, radius: float, r_cand: float) -> float:
    return beta**M * radius + r_cand


@dataclass(frozen=True)
class CoincidenceCertificate:
    found: bool
    M: int | None
    xi: AlgebraicElement | None
    letter: int | None
    letter_name: str | None
    radius_checked: float
    m_max: int
    r_cand: float
    candidates_tested: int
    xi_points_checked: int
    counterexample: AlgebraicElement | None = None
    note: str = "finite-radius certificate, not a proof"

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "M": self.M,
            "xi": None if self.xi is None else str(self.xi),
            "xi_coefficients": None if self.xi is None else [str(c) for c in self.xi.coefficients()],
            "letter": self.letter_name,
            "radius_checked": self.radius_checked,
            "m_max": self.m_max,
            "r_cand": self.r_cand,
            "candidates_tested": self.candidates_tested,
            "xi_points_checked": self.xi_points_checked,
            "counterexample": None if self.counterexample is None else str(self.counterexample),
            "note": self.note,
        }


def search_coincidence(
    patch: PatchPointSet,
    xi: ReturnModule,
    m_max: int = 8,
    radius: float = 20.0,
    r_cand: float | None = None,
    letters: Sequence[int] | None = None,
) -> CoincidenceCertificate:
    """Smallest M <= m_max and a xi with xi + beta^M (Xi within radius) inside C_i.

    Candidates: 0 first, then C_i within r_cand by increasing |xi|.  Raises
    PatchTooSmall as soon as an M is reached whose check would leave the patch.
    """
    if xi.radius < radius:
        raise PatchTooSmall(f"return set known up to {xi.radius:g}, check needs {radius:g}")
    if xi.den != patch.den:
        raise ValueError("patch and return set use different denominators")
    beta = patch.beta_value
    lens = np.diff(np.sort(patch.positions))
    r_cand = float(4 * lens.max()) if r_cand is None else r_cand
    letters = list(range(patch.kappa)) if letters is None else list(letters)
    ctx = xi.field
    sub = xi.within(radius)
    X = sub.coeffs
    tested = 0
    counterexample = None
    for M in range(1, m_max + 1):
        need = required_patch_radius(beta, M, radius, r_cand)
        if patch.radius < need:
            err = PatchTooSmall(f"M={M} needs patch radius {need:.6g}, have {patch.radius:.6g}")
            err.M = M
            err.needed_radius = need
            raise err
        scaled = beta_power_rows(X, M, ctx)
        for i in letters:
            keyset = patch.keysets[i]
            mask = (patch.labels == i) & (np.abs(patch.positions) <= r_cand)
            cand = patch.coeffs[mask]
            cpos = patch.positions[mask]
            order = np.lexsort((cpos, np.abs(cpos)))
            for rank, row in enumerate(cand[order]):
                tested += 1
                shifted = scaled + np.asarray(row, dtype=scaled.dtype)
                bad = None
                for k, key in enumerate(_rows_to_keys(shifted)):
                    if key not in keyset:
                        bad = k
                        break
                xi_elem = AlgebraicElement(ctx, tuple(int(v) for v in row), patch.den)
                if bad is None:
                    return CoincidenceCertificate(
                        found=True,
                        M=M,
                        xi=xi_elem,
                        letter=i,
                        letter_name=patch.letters[i],
                        radius_checked=radius,
                        m_max=m_max,
                        r_cand=r_cand,
                        candidates_tested=tested,
                        xi_points_checked=len(X),
                    )
                if rank == 0 and i == letters[0]:
                    # keep the witness against the canonical candidate at the largest M tried
                    counterexample = AlgebraicElement(ctx, tuple(int(v) for v in X[bad]), xi.den)
    return CoincidenceCertificate(
        found=False,
        M=None,
        xi=None,
        letter=None,
        letter_name=None,
        radius_checked=radius,
        m_max=m_max,
        r_cand=r_cand,
        candidates_tested=tested,
        xi_points_checked=len(X),
        counterexample=counterexample,
        note="no certificate within bounds (not a disproof)",
    )


@dataclass(frozen=True)
class InclusionCheck:
    holds: bool
    M: int
    r: float
    pairs_checked: int
    witness: tuple[AlgebraicElement, AlgebraicElement] | None = None

    def __bool__(self):
        return self.holds


def check_xi_difference_inclusion(
    xi: ReturnModule, M: int, r: float = 10.0, beta: float | None = None
) -> InclusionCheck:
    """beta^M x - beta^M y in Xi for x, y in Xi within r, whenever the result is inside the known radius."""
    if r > xi.radius:
        raise PatchTooSmall(f"return set known up to {xi.radius:g}, check needs {r:g}")
    sub = xi.within(r)
    beta = xi.beta_value if beta is None else beta
    co, vals = sub.coeffs, sub.values
    diff = (co[:, None, :] - co[None, :, :]).reshape(-1, co.shape[1])
    dval = (vals[:, None] - vals[None, :]).reshape(-1)
    sel = beta**M * np.abs(dval) <= xi.radius * (1 - 1e-12)
    diff = diff[sel]
    if diff.dtype != object:
        diff = np.unique(diff, axis=0)
    scaled = beta_power_rows(diff, M, xi.field)
    keys = xi.keys
    for k, key in enumerate(_rows_to_keys(scaled)):
        if key not in keys:
            # recover one witness pair for the report
            target = diff[k]
            for a in range(len(co)):
                for b in range(len(co)):
                    if np.array_equal(co[a] - co[b], target):
                        w = (
                            AlgebraicElement(xi.field, tuple(int(v) for v in co[a]), xi.den),
                            AlgebraicElement(xi.field, tuple(int(v) for v in co[b]), xi.den),
                        )
                        return InclusionCheck(False, M, r, int(sel.sum()), w)
    return InclusionCheck(True, M, r, int(sel.sum()))


@dataclass(frozen=True)
class KResult:
    K: int
    delta: float
    radius: float
    points: int


def find_K_for_E_delta(
    xi: ReturnModule, cps: CPSContext, delta: float, K_max: int = 12, radius: float = 20.0
) -> KResult:
    """Smallest K with beta^K (E_delta within radius) inside Xi."""
    d = cps.internal_dim
    pts = enumerate_lattice(
        cps,
        radius,
        [-delta] * d,
        [delta] * d,
        keep=lambda s: np.linalg.norm(s, axis=1) < delta,
    )
    pts = pts * xi.den
    keys = xi.keys
    for K in range(K_max + 1):
        if cps.beta**K * radius > xi.radius:
            raise PatchTooSmall(f"K={K} needs return set radius {cps.beta**K * radius:.6g}, have {xi.radius:.6g}")
        scaled = beta_power_rows(pts, K, xi.field)
        if all(key in keys for key in _rows_to_keys(scaled)):
            return KResult(K=K, delta=delta, radius=radius, points=len(pts))
    raise NotFound(K_max, "beta^K E_delta never fell inside the return set")


def lattice_to_xi_exponent(y: AlgebraicElement, xi: ReturnModule, ell_max: int = 20) -> int:
    """Smallest l <= ell_max with beta^l y in Xi."""
    if not y.is_integral:
        raise ValueError("y must lie in Z[beta]")
    row = np.array([[c * xi.den for c in y.num]], dtype=object)
    beta = xi.beta_value
    val = abs(sum(float(c) * beta**k for k, c in enumerate(y.num)) / y.den)
    for ell in range(ell_max + 1):
        if beta**ell * val > xi.radius:
            raise NotFound(ell_max, f"beta^{ell} y leaves the known return set radius {xi.radius:g}")
        key = _rows_to_keys(beta_power_rows(row, ell, xi.field))[0]
        if key in xi.keys:
            return ell
    raise NotFound(ell_max)
