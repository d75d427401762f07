"""Control points of the two-sided fixed-point tiling, return vectors and their module."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .algebra import AlgebraicElement, FieldContext
from .errors import NoSeed, RankDeficient, SizeLimit
from .substitution import SubstitutionSpec, SubstitutionSystem

log = logging.getLogger(__name__)

__all__ = [
    "Seed",
    "PatchPointSet",
    "ReturnModule",
    "ModuleAnalysis",
    "MeyerReport",
    "legal_pairs",
    "find_seed",
    "generate_patch",
    "grow_patch_to_counts",
    "compute_xi",
    "hermite_normal_form",
    "module_analysis",
    "meyer_flc_probe",
]

INT64_SAFE = 2**62


def _expand(word: np.ndarray, rules: list[np.ndarray], times: int = 1) -> np.ndarray:
    lens = np.array([len(r) for r in rules], dtype=np.int64)
    width = int(lens.max())
    table = np.full((len(rules), width), -1, dtype=np.int64)
    for k, r in enumerate(rules):
        table[k, : len(r)] = r
    for _ in range(times):
        counts = lens[word]
        total = int(counts.sum())
        src = np.repeat(word, counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        within = np.arange(total, dtype=np.int64) - starts
        word = table[src, within]
    return word


def _rule_arrays(spec: SubstitutionSpec) -> list[np.ndarray]:
    return [np.array(spec.rule_indices(j), dtype=np.int64) for j in range(spec.kappa)]


def legal_pairs(spec: SubstitutionSpec) -> set[tuple[int, int]]:
    """Two-letter words occurring in some iterate of the substitution."""
    rules = _rule_arrays(spec)
    found: set[tuple[int, int]] = set()
    frontier = []
    for r in rules:
        for a, b in zip(r[:-1], r[1:]):
            p = (int(a), int(b))
            if p not in found:
                found.add(p)
                frontier.append(p)
    while frontier:
        a, b = frontier.pop()
        w = np.concatenate([rules[a], rules[b]])
        for x, y in zip(w[:-1], w[1:]):
            p = (int(x), int(y))
            if p not in found:
                found.add(p)
                frontier.append(p)
    return found


@dataclass(frozen=True)
class Seed:
    """Fixed point of the N-th power grown from the legal pair ``left | right`` at the origin."""

    right: int
    left: int
    power: int

    def describe(self, letters: Sequence[str]) -> str:
        return f"{letters[self.left]}|{letters[self.right]} under the substitution^{self.power}"


def find_seed(spec: SubstitutionSpec) -> Seed:
    """Smallest power N with a legal pair (j'|j): rule^N(j) starts with j, rule^N(j') ends with j'."""
    rules = _rule_arrays(spec)
    k = spec.kappa
    legal = legal_pairs(spec)
    bound = k * max(len(r) for r in rules)
    words = [np.array([j], dtype=np.int64) for j in range(k)]
    for N in range(1, bound + 1):
        words = [_expand(w, rules) for w in words]
        for j in range(k):
            if words[j][0] != j:
                continue
            for jp in range(k):
                if words[jp][-1] == jp and (jp, j) in legal:
                    return Seed(right=j, left=jp, power=N)
    raise NoSeed(f"no seed pair found up to power {bound}")


@dataclass(frozen=True, eq=False)
class PatchPointSet:
    """Control points (left endpoints) with |x| <= radius, sorted by position.

    ``coeffs[k] / den`` is the exact position of point k on the power basis.
    """

    letters: tuple[str, ...]
    field: FieldContext
    den: int
    coeffs: np.ndarray
    labels: np.ndarray
    positions: np.ndarray
    radius: float
    requested_radius: float
    seed: Seed
    right_extent: float
    left_extent: float
    beta_value: float

    def __len__(self):
        return len(self.labels)

    @property
    def kappa(self) -> int:
        return len(self.letters)

    @property
    def integral(self) -> bool:
        return self.den == 1

    def letter_mask(self, i: int) -> np.ndarray:
        return self.labels == i

    def letter_coeffs(self, i: int) -> np.ndarray:
        return self.coeffs[self.labels == i]

    def letter_positions(self, i: int) -> np.ndarray:
        return self.positions[self.labels == i]

    def count(self, i: int) -> int:
        return int(np.count_nonzero(self.labels == i))

    @cached_property
    def keysets(self) -> tuple[frozenset, ...]:
        return tuple(
            frozenset(tuple(int(c) for c in row) for row in self.letter_coeffs(i)) for i in range(self.kappa)
        )

    def contains(self, i: int, key: tuple[int, ...]) -> bool:
        return key in self.keysets[i]

    def element(self, k: int) -> AlgebraicElement:
        return AlgebraicElement(self.field, tuple(int(c) for c in self.coeffs[k]), self.den)

    def points(self, i: int) -> list[AlgebraicElement]:
        return [self.element(k) for k in np.flatnonzero(self.labels == i)]

    def restrict(self, radius: float) -> PatchPointSet:
        keep = np.abs(self.positions) <= radius
        return PatchPointSet(
            letters=self.letters,
            field=self.field,
            den=self.den,
            coeffs=self.coeffs[keep],
            labels=self.labels[keep],
            positions=self.positions[keep],
            radius=min(radius, self.radius),
            requested_radius=min(radius, self.requested_radius),
            seed=self.seed,
            right_extent=self.right_extent,
            left_extent=self.left_extent,
            beta_value=self.beta_value,
        )


def _scaled_length_vectors(system: SubstitutionSystem) -> tuple[list[tuple[int, ...]], int]:
    den = 1
    for x in system.lengths:
        den = den * x.den // math.gcd(den, x.den)
    vecs = [tuple(c * (den // x.den) for c in x.num) for x in system.lengths]
    return vecs, den


def generate_patch(
    system: SubstitutionSystem,
    seed: Seed | None = None,
    radius: float = 10.0,
    max_points: int = 5_000_000,
) -> PatchPointSet:
    """Grow the two-sided fixed point until it covers [-radius, radius]."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    spec = system.spec
    seed = seed or find_seed(spec)
    rules = _rule_arrays(spec)
    lens_f = system.length_values()
    right = np.array([seed.right], dtype=np.int64)
    left = np.array([seed.left], dtype=np.int64)
    while True:
        r_ext = float(lens_f[right].sum())
        l_ext = float(lens_f[left].sum())
        if min(r_ext, l_ext) >= radius:
            break
        if len(right) + len(left) > max_points:
            raise SizeLimit(f"patch would exceed {max_points} tiles")
        right = _expand(right, rules, seed.power)
        left = _expand(left, rules, seed.power)

    vecs, den = _scaled_length_vectors(system)
    n = system.field.n
    bound = max(max(abs(c) for c in v) for v in vecs) * (len(right) + len(left) + 1)
    dtype = np.int64 if bound < INT64_SAFE else object
    L = np.array(vecs, dtype=dtype).reshape(len(vecs), n)

    # right half: left endpoints are exclusive prefix sums starting at 0
    rsteps = L[right]
    rco = np.zeros_like(rsteps)
    if len(right) > 1:
        rco[1:] = np.cumsum(rsteps[:-1], axis=0)
    rpos = np.concatenate([[0.0], np.cumsum(lens_f[right])[:-1]])
    # left half: tile k ends where tile k+1 starts; last tile ends at 0
    lsteps = L[left][::-1]
    lco = -np.cumsum(lsteps, axis=0)[::-1]
    lpos = -np.cumsum(lens_f[left][::-1])[::-1]

    coeffs = np.concatenate([lco, rco])
    labels = np.concatenate([left, right])
    positions = np.concatenate([lpos, rpos])
    if den != 1:
        log.warning(
            "control points are not in Z[beta] (common denominator %d); "
            "the rigidity map is assumed to be the identity",
            den,
        )
    guaranteed = min(r_ext, l_ext)
    keep = np.abs(positions) <= guaranteed
    return PatchPointSet(
        letters=spec.letters,
        field=system.field,
        den=den,
        coeffs=coeffs[keep],
        labels=labels[keep],
        positions=positions[keep],
        radius=guaranteed,
        requested_radius=radius,
        seed=seed,
        right_extent=r_ext,
        left_extent=l_ext,
        beta_value=system.beta_value,
    )


def grow_patch_to_counts(
    system: SubstitutionSystem,
    seed: Seed,
    per_letter: Sequence[int],
    patch: PatchPointSet | None = None,
    max_points: int = 3_000_000,
) -> PatchPointSet:
    """Enlarge a patch until letter i has at least per_letter[i] points (or the budget is spent)."""
    if patch is None:
        patch = generate_patch(system, seed, 4.0 * float(system.length_values().max()), max_points=max_points)
    while any(patch.count(i) < per_letter[i] for i in range(patch.kappa)):
        density = len(patch) / (2 * patch.radius)
        freq = [max(patch.count(i), 1) / len(patch) for i in range(patch.kappa)]
        want = max(per_letter[i] / freq[i] for i in range(patch.kappa))
        if want > max_points:
            if len(patch) >= 0.45 * max_points:
                break
            want = max_points * 0.9
        patch = generate_patch(system, seed, max(patch.radius * 1.5, 1.1 * want / (2 * density)), max_points=max_points)
    return patch


# ---------------------------------------------------------------------------
# return vectors


def hermite_normal_form(vectors: Sequence[Sequence[int]], n: int) -> list[list[int]]:
    """Row-style Hermite normal form of the Z-span of ``vectors`` in Z^n.

    Returns the nonzero rows (upper triangular, positive pivots, entries above
    each pivot reduced into [0, pivot)).
    """
    rows: list[list[int] | None] = [None] * n

    def normalize(col: int):
        piv = rows[col][col]
        for r in range(col):
            if rows[r] is not None and rows[r][col]:
                q = rows[r][col] // piv
                if q:
                    rows[r] = [a - q * b for a, b in zip(rows[r], rows[col])]

    for vec in vectors:
        v = [int(x) for x in vec]
        for col in range(n):
            if v[col] == 0:
                continue
            if rows[col] is None:
                if v[col] < 0:
                    v = [-x for x in v]
                rows[col] = v
                normalize(col)
                # entries right of the pivot may need reduction by later pivots
                for c2 in range(col + 1, n):
                    if rows[c2] is not None:
                        normalize(c2)
                break
            a, b = rows[col][col], v[col]
            g, x, y = _xgcd(a, b)
            new = [x * p + y * q for p, q in zip(rows[col], v)]
            v = [(a // g) * q - (b // g) * p for p, q in zip(rows[col], v)]
            if new[col] < 0:
                new = [-t for t in new]
            rows[col] = new
            normalize(col)
            for c2 in range(col + 1, n):
                if rows[c2] is not None:
                    normalize(c2)
    return [r for r in rows if r is not None]


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


@dataclass(frozen=True, eq=False)
class ReturnModule:
    """Same-letter differences of control points with |value| <= radius."""

    field: FieldContext
    den: int
    coeffs: np.ndarray
    values: np.ndarray
    radius: float
    beta_value: float

    def __len__(self):
        return len(self.values)

    @cached_property
    def keys(self) -> frozenset:
        return frozenset(tuple(int(c) for c in row) for row in self.coeffs)

    def __contains__(self, key) -> bool:
        if isinstance(key, AlgebraicElement):
            if key.den != self.den:
                key = (key * self.den)
                if key.den != 1:
                    return False
            key = key.num
        return tuple(key) in self.keys

    @property
    def xi_points(self) -> list[AlgebraicElement]:
        return [AlgebraicElement(self.field, tuple(int(c) for c in row), self.den) for row in self.coeffs]

    def within(self, radius: float) -> ReturnModule:
        keep = np.abs(self.values) <= radius
        return ReturnModule(
            self.field, self.den, self.coeffs[keep], self.values[keep], min(radius, self.radius), self.beta_value
        )

    @cached_property
    def hnf_basis(self) -> np.ndarray:
        """Columns generate the module; lower triangular (column HNF)."""
        n = self.field.n
        order = np.argsort(np.abs(self.values), kind="stable")
        rows = hermite_normal_form([self.coeffs[k] for k in order], n)
        if not rows:
            return np.zeros((n, 0), dtype=object)
        return np.array(rows, dtype=object).T

    @property
    def rank(self) -> int:
        return self.hnf_basis.shape[1]

    @property
    def index_in_L(self) -> int | None:
        b = self.hnf_basis
        if b.shape[1] < self.field.n:
            return None
        idx = 1
        for k in range(b.shape[1]):
            idx *= int(b[k, k])
        return abs(idx)

    @classmethod
    def from_elements(cls, elements: Sequence[AlgebraicElement], beta: float, radius: float) -> ReturnModule:
        from .substitution import real_value

        ctx = elements[0].field
        den = 1
        for x in elements:
            den = den * x.den // math.gcd(den, x.den)
        coeffs = np.array([[c * (den // x.den) for c in x.num] for x in elements], dtype=object)
        values = np.array([real_value(x, beta) for x in elements])
        return cls(ctx, den, coeffs, values, radius, beta)


def compute_xi(patch: PatchPointSet, radius: float | None = None) -> ReturnModule:
    """All same-letter differences of patch points with |value| <= radius (exact, deduplicated)."""
    radius = patch.radius if radius is None else radius
    eps = 1e-9 * max(1.0, radius)
    chunks = [np.zeros((1, patch.field.n), dtype=patch.coeffs.dtype)]
    for i in range(patch.kappa):
        mask = patch.labels == i
        pos = patch.positions[mask]
        co = patch.coeffs[mask]
        for s in range(1, len(pos)):
            d = pos[s:] - pos[:-s]
            sel = d <= radius + eps
            if not sel.any():
                break
            diff = co[s:][sel] - co[:-s][sel]
            chunks.append(diff)
            chunks.append(-diff)
    allc = np.concatenate(chunks)
    if allc.dtype == object:
        uniq = sorted({tuple(int(c) for c in row) for row in allc})
        allc = np.array(uniq, dtype=object).reshape(len(uniq), patch.field.n)
    else:
        allc = np.unique(allc, axis=0)
    values = _values(allc, patch.beta_value, patch.den)
    order = np.argsort(values, kind="stable")
    allc, values = allc[order], values[order]
    keep = np.abs(values) <= radius + eps
    return ReturnModule(patch.field, patch.den, allc[keep], values[keep], radius, patch.beta_value)


def _values(coeffs: np.ndarray, beta: float, den: int) -> np.ndarray:
    n = coeffs.shape[1]
    powers = np.array([beta**k for k in range(n)])
    return (coeffs.astype(float) @ powers) / den


@dataclass(frozen=True)
class ModuleAnalysis:
    hnf_basis: np.ndarray
    index_in_L: int
    generates_L: bool
    stabilized: bool
    radii: tuple[float, float]
    indices: tuple[int | None, int]


def module_analysis(xi: ReturnModule, ctx: FieldContext | None = None) -> ModuleAnalysis:
    """HNF of the coefficient vectors of Xi, its index in Z[beta], and stability at half radius."""
    if len(xi) == 0:
        raise RankDeficient("empty return set")
    if xi.den != 1:
        raise RankDeficient("return vectors are not integral; module index undefined")
    idx = xi.index_in_L
    if idx is None:
        raise RankDeficient(f"return vectors span rank {xi.rank} < {xi.field.n}; enlarge the radius")
    half = xi.within(xi.radius / 2)
    idx_half = half.index_in_L
    return ModuleAnalysis(
        hnf_basis=xi.hnf_basis,
        index_in_L=idx,
        generates_L=idx == 1,
        stabilized=idx_half == idx,
        radii=(xi.radius / 2, xi.radius),
        indices=(idx_half, idx),
    )


# ---------------------------------------------------------------------------
# finite-radius Meyer / FLC evidence


@dataclass(frozen=True)
class MeyerReport:
    radius: float
    min_gap_support: float
    min_gap_xi_differences: float
    local_radius: float
    local_configurations: int
    note: str = "finite-radius evidence, not a proof"


def _min_gap(values: np.ndarray) -> float:
    v = np.sort(values)
    if len(v) < 2:
        return math.inf
    return float(np.min(np.diff(v)))


def meyer_flc_probe(
    patch: PatchPointSet, xi: ReturnModule, radius: float | None = None, local_radius: float | None = None
) -> MeyerReport:
    radius = min(patch.radius, xi.radius) if radius is None else radius
    sub = patch.restrict(radius)
    gap_support = _min_gap(sub.positions)

    x = xi.within(radius)
    co = x.coeffs
    m = len(co)
    diffs = (co[:, None, :] - co[None, :, :]).reshape(m * m, -1)
    vals = (x.values[:, None] - x.values[None, :]).reshape(-1)
    sel = np.abs(vals) <= radius
    diffs, vals = diffs[sel], vals[sel]
    if diffs.dtype == object:
        seen = {}
        for row, v in zip(diffs, vals):
            seen.setdefault(tuple(int(c) for c in row), v)
        uvals = np.array(list(seen.values()))
    else:
        _, first = np.unique(diffs, axis=0, return_index=True)
        uvals = vals[first]
    gap_xi = _min_gap(uvals)

    r = local_radius if local_radius is not None else 2.0 * float(np.max(np.diff(np.sort(patch.positions))))
    pos = sub.positions
    lo = np.searchsorted(pos, pos - r, side="left")
    hi = np.searchsorted(pos, pos + r, side="right")
    configs = set()
    for k in range(len(pos)):
        if abs(pos[k]) > radius - r:
            continue
        c0 = sub.coeffs[k]
        conf = tuple(
            (int(sub.labels[t]), tuple(int(a) for a in (sub.coeffs[t] - c0))) for t in range(lo[k], hi[k])
        )
        configs.add(conf)
    return MeyerReport(
        radius=radius,
        min_gap_support=gap_support,
        min_gap_xi_differences=gap_xi,
        local_radius=r,
        local_configurations=len(configs),
    )
