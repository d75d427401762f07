"""Windows in the internal space: dual IFS attractors, box covers, overlap and regularity.

Covers live on the dyadic grid of side h = 2**-depth anchored at the origin;
cell k is the box [k*h, (k+1)*h).  All covers are outer approximations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .cps import CPSContext, enumerate_lattice, star_many, star_map
from .errors import BudgetExceeded, InsufficientPoints, NotContractive
from .pointset import PatchPointSet
from .substitution import DigitSets

__all__ = [
    "DualIFS",
    "WindowApprox",
    "build_dual_ifs",
    "attractor_by_iteration",
    "attractor_by_projection",
    "overlap_report",
    "regularity_report",
    "verify_model_set",
    "hausdorff_cells",
    "hausdorff_to_points",
    "boundary_cells",
    "erode",
]


# ---------------------------------------------------------------------------
# cell sets as sorted int64 keys


def _bits(dim: int) -> int:
    return min(62, 63 // dim)


def encode(cells: np.ndarray) -> np.ndarray:
    cells = np.asarray(cells, dtype=np.int64)
    if cells.ndim == 1:
        cells = cells[:, None]
    dim = cells.shape[1]
    b = _bits(dim)
    off = np.int64(1) << (b - 1)
    if cells.size and (cells.min() <= -off or cells.max() >= off - 1):
        raise BudgetExceeded(f"cell index out of the {b}-bit range; lower the depth")
    key = np.zeros(len(cells), dtype=np.int64)
    for j in range(dim):
        key = (key << b) | (cells[:, j] + off)
    return key


def decode(keys: np.ndarray, dim: int) -> np.ndarray:
    b = _bits(dim)
    off = np.int64(1) << (b - 1)
    mask = (np.int64(1) << b) - 1
    out = np.empty((len(keys), dim), dtype=np.int64)
    k = np.asarray(keys, dtype=np.int64).copy()
    for j in range(dim - 1, -1, -1):
        out[:, j] = (k & mask) - off
        k = k >> b
    return out


def _member(keys: np.ndarray, query: np.ndarray) -> np.ndarray:
    if len(keys) == 0:
        return np.zeros(len(query), dtype=bool)
    pos = np.searchsorted(keys, query)
    pos = np.minimum(pos, len(keys) - 1)
    return keys[pos] == query


# ---------------------------------------------------------------------------
# the dual IFS


@dataclass(frozen=True, eq=False)
class DualIFS:
    """Maps u -> D u + t for t in translations[i][j] send window j into window i."""

    letters: tuple[str, ...]
    D: np.ndarray
    translations: tuple[tuple[np.ndarray, ...], ...]
    power: int = 1

    @property
    def kappa(self) -> int:
        return len(self.letters)

    @property
    def dim(self) -> int:
        return self.D.shape[0]

    @property
    def contraction(self) -> float:
        return float(np.linalg.norm(self.D, 2))

    @property
    def S_star(self) -> np.ndarray:
        return np.array([[len(t) for t in row] for row in self.translations], dtype=np.int64)

    def bounding_radius(self) -> float:
        c = self.contraction
        tmax = max((float(np.abs(t).max()) if len(t) else 0.0) for row in self.translations for t in row)
        return math.sqrt(self.dim) * tmax / (1 - c)

    def compose(self, r: int) -> DualIFS:
        """The r-th iterate, which has the same attractor."""
        if r == 1:
            return self
        k = self.kappa
        cur = self.translations
        Dc = self.D
        for _ in range(r - 1):
            nxt = []
            for i in range(k):
                row = []
                for j in range(k):
                    parts = [
                        (self.translations[i][m][:, None, :] + (cur[m][j] @ self.D.T)[None, :, :]).reshape(-1, self.dim)
                        for m in range(k)
                        if len(self.translations[i][m]) and len(cur[m][j])
                    ]
                    row.append(np.concatenate(parts) if parts else np.zeros((0, self.dim)))
                nxt.append(tuple(row))
            cur = tuple(nxt)
            Dc = Dc @ self.D
        return DualIFS(self.letters, Dc, cur, self.power * r)


def build_dual_ifs(digits: DigitSets, cps: CPSContext) -> DualIFS:
    D = cps.D
    c = float(np.linalg.norm(D, 2))
    if not c < 1:
        raise NotContractive(f"operator norm of D is {c:.6g} >= 1")
    k = digits.kappa
    trans = tuple(
        tuple(
            np.array([star_map(a, cps) for a in digits.D[i][j]]).reshape(len(digits.D[i][j]), cps.internal_dim)
            for j in range(k)
        )
        for i in range(k)
    )
    return DualIFS(digits.letters, D.copy(), trans)


# ---------------------------------------------------------------------------
# covers


@dataclass(frozen=True, eq=False)
class WindowApprox:
    """Per-letter box covers at one depth, optionally with the finer cover they were coarsened from."""

    letters: tuple[str, ...]
    depth: int
    dim: int
    keys: tuple[np.ndarray, ...]
    route: str
    refined: WindowApprox | None = None
    clouds: tuple[np.ndarray, ...] | None = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return 2.0**-self.depth

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def cells(self, i: int) -> np.ndarray:
        return decode(self.keys[i], self.dim)

    def counts(self) -> list[int]:
        return [len(k) for k in self.keys]

    def measures(self) -> np.ndarray:
        return np.array([len(k) * self.cell_volume for k in self.keys])

    def finest(self) -> WindowApprox:
        return self.refined.finest() if self.refined is not None else self

    def contains_points(self, i: int, pts: np.ndarray) -> np.ndarray:
        idx = np.floor(np.asarray(pts) / self.h).astype(np.int64)
        return _member(self.keys[i], encode(idx))

    def coarsen(self, depth: int) -> WindowApprox:
        if depth > self.depth:
            raise ValueError("can only coarsen to a smaller depth")
        s = self.depth - depth
        keys = tuple(np.unique(encode(decode(k, self.dim) >> s)) for k in self.keys)
        return WindowApprox(self.letters, depth, self.dim, keys, self.route, refined=self)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        allc = np.concatenate([self.cells(i) for i in range(len(self.keys))])
        return allc.min(axis=0) * self.h, (allc.max(axis=0) + 1) * self.h


def _neighbour_offsets(dim: int, full: bool) -> np.ndarray:
    if full:
        offs = [o for o in itertools.product((-1, 0, 1), repeat=dim) if any(o)]
    else:
        offs = []
        for j in range(dim):
            for s in (-1, 1):
                o = [0] * dim
                o[j] = s
                offs.append(tuple(o))
    return np.array(offs, dtype=np.int64)


def boundary_cells(keys: np.ndarray, dim: int) -> np.ndarray:
    """Cells of the cover with a face neighbour outside it."""
    cells = decode(keys, dim)
    inner = np.ones(len(keys), dtype=bool)
    for o in _neighbour_offsets(dim, full=False):
        inner &= _member(keys, encode(cells + o))
    return keys[~inner]


def erode(keys: np.ndarray, dim: int, layers: int = 1) -> np.ndarray:
    """Remove every cell within ``layers`` (Chebyshev) of the complement."""
    offs = _neighbour_offsets(dim, full=True)
    for _ in range(layers):
        if len(keys) == 0:
            break
        cells = decode(keys, dim)
        keep = np.ones(len(keys), dtype=bool)
        for o in offs:
            keep &= _member(keys, encode(cells + o))
        keys = keys[keep]
    return keys


def _image_pairs(cells: np.ndarray, h: float, D: np.ndarray, trans: np.ndarray, targets: np.ndarray):
    """(source index, target index) for every target cell meeting the bounding box of an image f(cell)."""
    empty = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    if len(cells) == 0 or len(trans) == 0 or len(targets) == 0:
        return empty
    dim = D.shape[0]
    centers = (cells + 0.5) * h
    half = np.abs(D).sum(axis=1) * (h / 2) + 1e-12 * (1 + h)
    span = int(np.ceil(2 * half.max() / h)) + 1
    offs = np.array(list(itertools.product(range(span), repeat=dim)), dtype=np.int64)
    base_img = centers @ D.T
    src_all, tgt_all = [], []
    idx = np.arange(len(cells), dtype=np.int64)
    for t in trans:
        img = base_img + t
        lo = np.floor((img - half) / h).astype(np.int64)
        hi = np.floor((img + half) / h).astype(np.int64)
        for o in offs:
            c = lo + o
            ok = np.all(c <= hi, axis=1)
            if not ok.any():
                continue
            q = encode(c[ok])
            pos = np.minimum(np.searchsorted(targets, q), len(targets) - 1)
            hit = targets[pos] == q
            src_all.append(idx[ok][hit])
            tgt_all.append(pos[hit])
    if not src_all:
        return empty
    return np.concatenate(src_all), np.concatenate(tgt_all)


def _fixed_point(keys: list[np.ndarray], ifs: DualIFS, h: float) -> list[np.ndarray]:
    """Largest X inside ``keys`` with X = F(X) & X, by support counting.

    Every cell counts the (source cell, map) images that reach it; removing a
    cell decrements the counts of the cells it supports, until no unsupported
    cell is left.  Same result as iterating X -> F(X) & X to stability.
    """
    k = ifs.kappa
    sizes = [len(x) for x in keys]
    off = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    total = int(off[-1])
    cells = [decode(x, ifs.dim) for x in keys]
    srcs, tgts = [], []
    for i in range(k):
        for j in range(k):
            s_, t_ = _image_pairs(cells[j], h, ifs.D, ifs.translations[i][j], keys[i])
            srcs.append(s_ + off[j])
            tgts.append(t_ + off[i])
    src = np.concatenate(srcs)
    tgt = np.concatenate(tgts)
    support = np.bincount(tgt, minlength=total)
    order = np.argsort(src, kind="stable")
    src, tgt = src[order], tgt[order]
    starts = np.searchsorted(src, np.arange(total + 1))
    alive = np.ones(total, dtype=bool)
    frontier = np.flatnonzero(support == 0)
    while len(frontier):
        alive[frontier] = False
        cnt = starts[frontier + 1] - starts[frontier]
        n = int(cnt.sum())
        if n:
            first = np.repeat(starts[frontier], cnt)
            within = np.arange(n) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            support -= np.bincount(tgt[first + within], minlength=total)
        frontier = np.flatnonzero((support <= 0) & alive)
    return [keys[i][alive[off[i] : off[i + 1]]] for i in range(k)]


def _subdivide(keys: np.ndarray, dim: int) -> np.ndarray:
    cells = decode(keys, dim) * 2
    offs = np.array(list(itertools.product((0, 1), repeat=dim)), dtype=np.int64)
    return np.unique(np.concatenate([encode(cells + o) for o in offs]))


def _auto_power(c: float, target: float = 0.5) -> int:
    return max(1, math.ceil(math.log(target) / math.log(c))) if c > 0 else 1


def attractor_by_iteration(
    ifs: DualIFS,
    depth: int,
    oversample: int = 1,
    power: int | None = None,
    max_cells: int = 30_000_000,
) -> WindowApprox:
    """Outer box covers of the attractor, converged level by level up to depth + oversample.

    Each level starts from the subdivided cover of the previous one and
    shrinks it to the largest X with X = F(X) & X.  The r-th iterate of the IFS
    (contraction <= 1/2) keeps the fixed cover within about one cell of the
    attractor.  The returned cover is coarsened to ``depth``.
    """
    if not ifs.contraction < 1:
        raise NotContractive(f"operator norm of D is {ifs.contraction:.6g} >= 1")
    r = _auto_power(ifs.contraction) if power is None else power
    work = ifs.compose(r)
    dim = ifs.dim
    rho = ifs.bounding_radius() * 1.01 + 1e-9
    final = depth + oversample
    g = min(final, math.floor(math.log2(8 / rho)))
    h = 2.0**-g
    n = int(math.ceil(rho / h))
    axis = np.arange(-n, n)
    box = np.array(np.meshgrid(*([axis] * dim), indexing="ij")).reshape(dim, -1).T
    keys = [np.unique(encode(box)) for _ in range(ifs.kappa)]
    while True:
        keys = _fixed_point(keys, work, 2.0**-g)
        if g >= final:
            break
        keys = [_subdivide(kk, dim) for kk in keys]
        if sum(len(x) for x in keys) > max_cells:
            raise BudgetExceeded(f"cover exceeds {max_cells} cells at depth {g + 1}")
        g += 1
    fine = WindowApprox(ifs.letters, g, dim, tuple(keys), route="ifs")
    return fine.coarsen(depth) if oversample > 0 else fine


def attractor_by_projection(
    patch: PatchPointSet, cps: CPSContext, depth: int, min_points: int = 1000
) -> WindowApprox:
    """Cells containing the star images of the generated control points."""
    dim = cps.internal_dim
    h = 2.0**-depth
    keys, clouds = [], []
    for i in range(patch.kappa):
        co = patch.letter_coeffs(i)
        if len(co) < min_points:
            raise InsufficientPoints(f"letter {patch.letters[i]!r} has {len(co)} points, need {min_points}")
        s = star_many(co, cps, patch.den)
        clouds.append(s)
        keys.append(np.unique(encode(np.floor(s / h).astype(np.int64))))
    return WindowApprox(patch.letters, depth, dim, tuple(keys), route="projection", clouds=tuple(clouds))


# ---------------------------------------------------------------------------
# comparisons and reports


def _centers(wa: WindowApprox, i: int) -> np.ndarray:
    return (wa.cells(i) + 0.5) * wa.h


def hausdorff_to_points(wa: WindowApprox, i: int, pts: np.ndarray) -> float:
    """Hausdorff distance between the union of cells of letter i and a dense sample of a target set."""
    pts = np.asarray(pts, dtype=float).reshape(-1, wa.dim)
    c = _centers(wa, i)
    half = wa.h / 2 * math.sqrt(wa.dim)
    d1, _ = cKDTree(pts).query(c)
    d2, _ = cKDTree(c).query(pts)
    # a cell reaches h/2 (per axis) beyond its center
    return float(max(d1.max() + half, max(d2.max() - half, 0.0)))


def hausdorff_cells(a: WindowApprox, b: WindowApprox, i: int) -> float:
    """Hausdorff distance in cell units between two covers of letter i at the same depth."""
    if a.depth != b.depth:
        raise ValueError("covers must share a depth")
    ca, cb = a.cells(i).astype(float), b.cells(i).astype(float)
    if len(ca) == 0 or len(cb) == 0:
        return math.inf
    d1, _ = cKDTree(cb).query(ca)
    d2, _ = cKDTree(ca).query(cb)
    return float(max(d1.max(), d2.max()))


@dataclass(frozen=True)
class OverlapReport:
    depth: int
    erosion_layers: int
    measures: list[float]
    overlaps: list[list[float]]
    disjoint_interiors: bool

    @property
    def max_overlap(self) -> float:
        k = len(self.overlaps)
        return max((self.overlaps[i][j] for i in range(k) for j in range(k) if i != j), default=0.0)

    @property
    def relative_max_overlap(self) -> float:
        tot = sum(self.measures)
        return self.max_overlap / tot if tot else 0.0

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "erosion_layers": self.erosion_layers,
            "measures": self.measures,
            "eroded_overlap": self.overlaps,
            "relative_max_overlap": self.relative_max_overlap,
            "disjoint_interiors": self.disjoint_interiors,
        }


def overlap_report(wa: WindowApprox) -> OverlapReport:
    """Pairwise overlap of covers after eroding one layer of cells at ``wa.depth``.

    When the cover was coarsened from a finer one, the erosion runs on the
    finer grid with the same physical width, which is sharper.
    """
    fine = wa.refined if wa.refined is not None else wa
    layers = 2 ** (fine.depth - wa.depth)
    eroded = [erode(k, fine.dim, layers) for k in fine.keys]
    k = len(eroded)
    vol = fine.cell_volume
    ov = [[0.0] * k for _ in range(k)]
    for i in range(k):
        ov[i][i] = len(eroded[i]) * vol
        for j in range(i + 1, k):
            v = len(np.intersect1d(eroded[i], eroded[j], assume_unique=True)) * vol
            ov[i][j] = ov[j][i] = v
    disjoint = all(ov[i][j] == 0 for i in range(k) for j in range(k) if i != j)
    return OverlapReport(wa.depth, 1, list(fine.measures()), ov, disjoint)


@dataclass(frozen=True)
class RegularityReport:
    depths: list[int]
    boundary_counts: list[int]
    boundary_volume: list[float]
    decay_exponent: float
    decreasing: bool
    eigen_residual: float
    measures: list[float]
    residual_depth: int

    @property
    def regular_evidence(self) -> bool:
        return self.decreasing

    def to_dict(self) -> dict:
        return {
            "depths": self.depths,
            "boundary_cells": self.boundary_counts,
            "boundary_volume": self.boundary_volume,
            "decay_exponent": self.decay_exponent,
            "strictly_decreasing": self.decreasing,
            "eigen_residual": self.eigen_residual,
            "residual_depth": self.residual_depth,
            "measures": self.measures,
            "regular_evidence": self.regular_evidence,
        }


def regularity_report(covers: Sequence[WindowApprox], ifs: DualIFS | None = None) -> RegularityReport:
    """Boundary volume b(g) over the given depths and the measure eigen-relation residual.

    ``covers`` are covers of the same windows at increasing depths.  The
    residual uses the finest cover available.
    """
    covers = sorted(covers, key=lambda w: w.depth)
    counts, vols = [], []
    for wa in covers:
        cnt = sum(len(boundary_cells(k, wa.dim)) for k in wa.keys)
        counts.append(cnt)
        vols.append(cnt * wa.cell_volume)
    depths = [w.depth for w in covers]
    if len(covers) >= 2 and all(v > 0 for v in vols):
        slope = float(np.polyfit(depths, np.log2(vols), 1)[0])
    else:
        slope = 0.0
    decreasing = len(vols) >= 2 and all(b < a for a, b in zip(vols, vols[1:]))
    fine = covers[-1].finest()
    w = fine.measures()
    resid = math.nan
    if ifs is not None:
        if ifs.power != 1:
            raise ValueError("pass the base IFS, not an iterate")
        det = abs(float(np.linalg.det(ifs.D)))
        S = ifs.S_star
        nw = np.linalg.norm(w)
        resid = float(np.linalg.norm(w - det * S @ w) / nw) if nw > 0 else math.nan
    return RegularityReport(depths, counts, vols, slope, decreasing, resid, list(w), fine.depth)


@dataclass(frozen=True)
class ModelSetCheck:
    radius: float
    depth: int
    margin: int
    control_points: int
    lattice_points: int
    exceptions_points_outside_window: list[int]
    exceptions_window_points_missing: list[int]

    @property
    def total_exceptions(self) -> int:
        return sum(self.exceptions_points_outside_window) + sum(self.exceptions_window_points_missing)

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "depth": self.depth,
            "margin_cells": self.margin,
            "control_points_checked": self.control_points,
            "lattice_points_checked": self.lattice_points,
            "control_points_outside_cover": self.exceptions_points_outside_window,
            "inner_window_points_not_control_points": self.exceptions_window_points_missing,
        }


def verify_model_set(
    patch: PatchPointSet,
    wa: WindowApprox,
    cps: CPSContext,
    margin: int = 2,
    radius: float | None = None,
    basis: np.ndarray | None = None,
) -> ModelSetCheck:
    """Check both inclusions between control points and the cut of the window over |x| <= radius.

    (1) each control point's star image lies in its letter's cover;
    (2) each lattice point whose star image lies in the cover eroded by
        ``margin`` cells is a control point of that letter.
    """
    radius = patch.radius if radius is None else min(radius, patch.radius)
    sub = patch.restrict(radius)
    k = patch.kappa
    out1 = []
    for i in range(k):
        s = star_many(sub.letter_coeffs(i), cps, sub.den)
        out1.append(int(np.count_nonzero(~wa.contains_points(i, s))))

    inner = [erode(kk, wa.dim, margin) for kk in wa.keys]
    nonempty = [kk for kk in inner if len(kk)]
    out2 = [0] * k
    total_lattice = 0
    if nonempty:
        allc = decode(np.concatenate(nonempty), wa.dim)
        lo, hi = allc.min(axis=0) * wa.h, (allc.max(axis=0) + 1) * wa.h
        pts = enumerate_lattice(cps, radius, lo, hi, basis=basis)
        total_lattice = len(pts)
        s = star_many(pts, cps)
        qkeys = encode(np.floor(s / wa.h).astype(np.int64))
        for i in range(k):
            hit = _member(inner[i], qkeys)
            keyset = sub.keysets[i]
            rows = pts[hit] * patch.den
            out2[i] = sum(1 for r in rows if tuple(int(v) for v in r) not in keyset)
    return ModelSetCheck(radius, wa.depth, margin, len(sub), total_lattice, out1, out2)
