import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from substcps.cps import star_many
from substcps.errors import InsufficientPoints, NotContractive
from substcps.pointset import generate_patch
from substcps.window import (
    DualIFS,
    WindowApprox,
    attractor_by_iteration,
    attractor_by_projection,
    boundary_cells,
    build_dual_ifs,
    decode,
    encode,
    erode,
    hausdorff_cells,
    hausdorff_to_points,
    overlap_report,
    regularity_report,
    verify_model_set,
)

from scipy.spatial import cKDTree

from conftest import cover, cps, patch, system


def ifs(name):
    return build_dual_ifs(system(name).digits, cps(name))


def hull_oracle(f, steps=200):
    """Convex hulls of 1-D attractors by iterating the interval map to its fixed point."""
    k = f.kappa
    d = float(f.D[0, 0])
    lo, hi = np.zeros(k), np.zeros(k)
    for _ in range(steps):
        nlo, nhi = np.full(k, np.inf), np.full(k, -np.inf)
        for i in range(k):
            for j in range(k):
                for t in f.translations[i][j][:, 0]:
                    a, b = sorted((d * lo[j] + t, d * hi[j] + t))
                    nlo[i], nhi[i] = min(nlo[i], a), max(nhi[i], b)
        lo, hi = nlo, nhi
    return lo, hi


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3).flatmap(lambda d: st.lists(st.lists(st.integers(-10**6, 10**6), min_size=d, max_size=d), min_size=1, max_size=20)))
def test_encode_round_trip(rows):
    a = np.array(rows, dtype=np.int64)
    assert np.array_equal(decode(encode(a), a.shape[1]), a)


def test_not_contractive():
    f = DualIFS(("a",), np.array([[1.5]]), ((np.zeros((1, 1)),),))
    with pytest.raises(NotContractive):
        attractor_by_iteration(f, 4)


@pytest.mark.parametrize("name", ["fibonacci", "aab_abab"])
def test_interval_windows_match_hull_oracle(name):
    f = ifs(name)
    wa = attractor_by_iteration(f, 9)
    lo, hi = hull_oracle(f)
    for i in range(f.kappa):
        c = wa.cells(i)[:, 0]
        assert abs(c.min() * wa.h - lo[i]) <= 2 * wa.h
        assert abs((c.max() + 1) * wa.h - hi[i]) <= 2 * wa.h
        # windows are intervals: the cover has no holes
        assert c.max() - c.min() + 1 == len(c)


def test_projection_lies_in_ifs_cover():
    """Star images of control points are inside the IFS cover."""
    wa = attractor_by_iteration(ifs("tribonacci"), 7)
    p = patch("tribonacci", 300.0)
    for i in range(3):
        s = star_many(p.letter_coeffs(i), cps("tribonacci"))
        assert wa.contains_points(i, s).all()


def test_projection_needs_points():
    p = generate_patch(system("fibonacci"), radius=20.0)
    with pytest.raises(InsufficientPoints):
        attractor_by_projection(p, cps("fibonacci"), 6)


def test_ifs_and_projection_agree_fibonacci():
    wa = attractor_by_iteration(ifs("fibonacci"), 8)
    pr = attractor_by_projection(patch("fibonacci", 3000.0), cps("fibonacci"), 8)
    for i in range(2):
        assert hausdorff_cells(wa, pr, i) <= 2


def test_hausdorff_to_points_is_an_upper_bound():
    wa = WindowApprox(("a",), 4, 1, (encode(np.arange(0, 16)[:, None]),), route="test")
    h = wa.h
    # cells cover [0, 1] exactly; the bound adds half a cell to center distances
    d = hausdorff_to_points(wa, 0, np.linspace(0, 1, 2001))
    assert 0 <= d <= h / 2 + 1e-3
    shifted = hausdorff_to_points(wa, 0, np.linspace(0.25, 1.25, 2001))
    assert 0.25 <= shifted <= 0.25 + h / 2 + 1e-3


def test_coarsen_keeps_cover():
    wa = attractor_by_iteration(ifs("fibonacci"), 8, oversample=2)
    fine = wa.finest()
    assert fine.depth == 10
    for i in range(2):
        centers = (fine.cells(i) + 0.5) * fine.h
        assert wa.contains_points(i, centers).all()


def test_erode_and_boundary_on_square():
    cells = np.array([(x, y) for x in range(10) for y in range(10)], dtype=np.int64)
    keys = np.sort(encode(cells))
    assert len(boundary_cells(keys, 2)) == 36
    assert len(erode(keys, 2, 1)) == 64
    assert len(erode(keys, 2, 5)) == 0


def test_identical_covers_overlap_fully():
    wa = attractor_by_iteration(ifs("fibonacci"), 7)
    twin = WindowApprox(("a", "b"), wa.depth, 1, (wa.keys[0], wa.keys[0]), route="test")
    ov = overlap_report(twin)
    assert not ov.disjoint_interiors
    assert ov.overlaps[0][1] == pytest.approx(ov.overlaps[0][0])


def test_fibonacci_overlap_is_empty():
    ov = overlap_report(attractor_by_iteration(ifs("fibonacci"), 9))
    assert ov.disjoint_interiors and ov.max_overlap == 0


def _checkerboard(depth, size=1.0):
    n = int(size * 2**depth)
    cells = np.array([(x, y) for x in range(n) for y in range(n) if (x + y) % 2 == 0], dtype=np.int64)
    return WindowApprox(("a",), depth, 2, (np.sort(encode(cells)),), route="test")


def test_fake_alternating_cover_is_flagged():
    """A checkerboard has boundary volume that never shrinks with depth."""
    rep = regularity_report([_checkerboard(d) for d in (3, 4, 5, 6)])
    assert not rep.decreasing
    assert not rep.regular_evidence


def test_boundary_volume_decreases_for_fibonacci():
    f = ifs("fibonacci")
    covers = [attractor_by_iteration(f, d) for d in (6, 7, 8, 9)]
    rep = regularity_report(covers, f)
    assert rep.boundary_counts == [4, 4, 4, 4]
    assert rep.decreasing
    assert rep.eigen_residual < 0.01


def test_regularity_wants_base_ifs():
    f = ifs("fibonacci")
    with pytest.raises(ValueError):
        regularity_report([attractor_by_iteration(f, 6)], f.compose(2))


def test_model_set_inclusions_fibonacci():
    wa = attractor_by_iteration(ifs("fibonacci"), 9)
    chk = verify_model_set(patch("fibonacci", 300.0), wa, cps("fibonacci"), margin=2, radius=200.0)
    assert chk.total_exceptions == 0
    assert chk.control_points > 0 and chk.lattice_points > 0


@pytest.mark.parametrize("name", ["fibonacci", "tribonacci", "aab_abab"])
def test_refinement_is_monotone_and_converges(name):
    """Outer covers shrink with depth; depths 9 and 10 agree within 1%."""
    wa = cover(name, 9)
    m9, m10 = wa.measures(), wa.finest().measures()
    assert wa.finest().depth == 10
    assert np.all(m10 <= m9 + 1e-12)
    assert np.all(np.abs(m9 - m10) <= 0.01 * m9)
    m8 = wa.coarsen(8).measures()
    assert np.all(m9 <= m8 + 1e-12)


@pytest.mark.parametrize("name", ["fibonacci", "tribonacci"])
def test_cover_is_a_fixed_point_up_to_one_layer(name):
    """One application of the set equations reproduces the cover within one cell."""
    f = ifs(name)
    wa = cover(name, 9).coarsen(7)
    h, dim = wa.h, wa.dim
    corners = np.array(np.meshgrid(*([[0.0, 0.5, 1.0]] * dim), indexing="ij")).reshape(dim, -1).T
    for i in range(f.kappa):
        images = []
        for j in range(f.kappa):
            pts = ((wa.cells(j)[:, None, :] + corners[None, :, :]) * h).reshape(-1, dim)
            for t in f.translations[i][j]:
                images.append(np.floor((pts @ f.D.T + t) / h).astype(np.int64))
        img = np.unique(np.concatenate(images), axis=0)
        own = wa.cells(i)
        d_img, _ = cKDTree(own).query(img, p=np.inf)
        d_own, _ = cKDTree(img).query(own, p=np.inf)
        assert d_img.max() <= 1 and d_own.max() <= 1
