"""Acceptance criteria, one test each, at the stated tolerances.

Each test prints a single PASS/FAIL line (collected again in the terminal
summary by conftest) and then asserts every sub-check.
"""

import math
import time

import numpy as np
import pytest

from substcps import PipelineOptions, VerdictKind, run_pipeline
from substcps.coincidence import check_xi_difference_inclusion
from substcps.cps import star_many
from substcps.substitution import iterate_digit_sets, parse_beta_expression, validate_tile_equation
from substcps.window import (
    attractor_by_iteration,
    boundary_cells,
    build_dual_ifs,
    hausdorff_to_points,
    regularity_report,
)

from conftest import PISOT_EXAMPLES, certificate, cps, spec, system, xi

RESULTS = []
SQRT2 = math.sqrt(2)


class Criterion:
    """Collects named sub-checks and reports them as one line."""

    def __init__(self, label):
        self.label = label
        self.checks = []
        self.t0 = time.perf_counter()

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def finish(self):
        failed = [f"{n} ({d})" if d else n for n, ok, d in self.checks if not ok]
        line = f"{'PASS' if not failed else 'FAIL'} {self.label}"
        line += f" [{len(self.checks)} checks, {time.perf_counter() - self.t0:.1f}s]"
        if failed:
            line += " failed: " + "; ".join(failed)
        RESULTS.append(line)
        print(line)
        assert not failed, line


def test_criterion_1_aab_abab_window_overlap():
    c = Criterion("1 aab_abab: exact digit sets, interval attractors, overlap, verdict")
    t0 = time.perf_counter()
    rep = run_pipeline(spec("aab_abab"))
    elapsed = time.perf_counter() - t0

    s = rep.artifacts["system"]
    ctx = s.field
    root2 = parse_beta_expression("beta - 2", ctx)
    e = lambda v: ctx.from_int(v)
    # Lambda_a = (beta Lambda_a + {0, 1}) u (beta Lambda_b + {0, 1 + sqrt 2})
    # Lambda_b = (beta Lambda_a + {2}) u (beta Lambda_b + {1, 2 + sqrt 2})
    want = [[{e(0), e(1)}, {e(0), e(1) + root2}], [{e(2)}, {e(1), e(2) + root2}]]
    got = [[set(s.digits.D[i][j]) for j in range(2)] for i in range(2)]
    c.check("digit sets", got == want, str(got))
    c.check("sqrt 2 squared", root2 * root2 == e(2))

    wa = rep.artifacts["window"]
    targets = [(0.0, 1 + SQRT2), (SQRT2, 2 + SQRT2)]
    for i, (lo, hi) in enumerate(targets):
        d = hausdorff_to_points(wa, i, np.linspace(lo, hi, 20001))
        c.check(f"Hausdorff {wa.letters[i]}", d < 0.02, f"{d:.4g}")
    ov = rep.data["overlap"]["eroded_overlap"][0][1]
    c.check("eroded overlap 1.0 +- 0.05", abs(ov - 1.0) <= 0.05, f"{ov:.4f}")
    c.check("verdict WindowOverlap", rep.verdict.kind == VerdictKind.OVERLAP, rep.verdict.kind.value)
    c.check("non-unimodular flagged", "non-unimodular expansion" in rep.data["notes"])
    c.check("|p(0)| = 2", abs(rep.data["constant_term"]) == 2)
    c.check("runtime < 10 s", elapsed < 10, f"{elapsed:.1f}s")
    c.finish()


def test_criterion_2_fibonacci_end_to_end():
    c = Criterion("2 Fibonacci: margin, index, certificate, interval windows, inclusions, verdict")
    t0 = time.perf_counter()
    rep = run_pipeline(spec("fibonacci"), PipelineOptions(radius=200.0, m_max=4))
    ifs = rep.artifacts["ifs"]
    counts = []
    for depth in range(6, 11):
        wa = attractor_by_iteration(ifs, depth)
        counts.append(sum(len(boundary_cells(k, 1)) for k in wa.keys))
    elapsed = time.perf_counter() - t0

    d = rep.data
    c.check("unimodular", d["unimodular"] is True)
    margin = d["pisot_family"]["margin"]
    c.check("Pisot margin (3 - sqrt 5)/2 +- 1e-6", abs(margin - (3 - math.sqrt(5)) / 2) <= 1e-6, f"{margin!r}")
    c.check("index_in_L = 1", d["pointset"]["index_in_L"] == 1)
    co = d["coincidence"]
    c.check("certificate at R = 200", co["found"] and co["radius_checked"] == 200.0, str(co["radius_checked"]))
    c.check("xi = 0 and M <= 4", co["xi"] == "0" and co["M"] <= 4, f"xi={co['xi']} M={co['M']}")
    c.check("boundary cells <= 4 at depths 6-10", all(n <= 4 for n in counts), str(counts))
    inc = d["model_set_inclusions"]
    exc = inc["control_points_outside_cover"] + inc["inner_window_points_not_control_points"]
    c.check("inclusions at depth 9, margin 2", inc["depth"] == 9 and inc["margin_cells"] == 2)
    c.check("0 exceptions both directions", sum(exc) == 0, str(exc))
    c.check("checked something", inc["control_points_checked"] > 100 and inc["lattice_points_checked"] > 100)
    c.check("verdict Regular", rep.verdict.kind == VerdictKind.REGULAR, rep.verdict.kind.value)
    c.check("runtime < 30 s", elapsed < 30, f"{elapsed:.1f}s")
    c.finish()


def test_criterion_3_tribonacci_rauzy_windows():
    c = Criterion("3 tribonacci: rotation-scaling, IFS vs projection, overlap, residual, b(g)")
    t0 = time.perf_counter()
    rep = run_pipeline(spec("tribonacci"))
    ifs = rep.artifacts["ifs"]
    fine = attractor_by_iteration(ifs, 9)
    covers = [fine.coarsen(d) for d in (6, 7, 8)] + [fine]
    reg = regularity_report(covers, ifs)
    elapsed = time.perf_counter() - t0

    D = rep.artifacts["cps"].D
    beta = rep.artifacts["cps"].beta
    mod2 = abs(np.linalg.det(D))
    c.check("internal space R^2", D.shape == (2, 2))
    c.check("rotation-scaling", abs(D[0, 0] - D[1, 1]) < 1e-12 and abs(D[0, 1] + D[1, 0]) < 1e-12)
    c.check("modulus^2 = 1/beta within 1e-9", abs(mod2 - 1 / beta) <= 1e-9, f"{mod2 - 1 / beta:.2e}")
    w = rep.data["windows"]
    hd = w["projection"]["hausdorff_cells"]
    c.check("covers at depth 8", w["depth"] == 8)
    c.check("IFS vs projection <= 3 cells", max(hd) <= 3, str(hd))
    rel = rep.data["overlap"]["relative_max_overlap"]
    c.check("eroded overlap < 1%", rel < 0.01, f"{rel:.4%}")
    res = reg.eigen_residual
    c.check("eigen-relation residual < 2%", res < 0.02, f"{res:.4%}")
    c.check("b(g) strictly decreasing 6 -> 9", reg.depths == [6, 7, 8, 9] and reg.decreasing, str(reg.boundary_volume))
    c.check("runtime < 60 s", elapsed < 60, f"{elapsed:.1f}s")
    c.finish()


def test_criterion_4_negative_controls():
    c = Criterion("4 negative controls: Thue-Morse and a non-Pisot quadratic")
    for name, reason in (("thue_morse", "empty internal space"), ("non_pisot", "Pisot family condition fails")):
        t0 = time.perf_counter()
        rep = run_pipeline(spec(name))
        elapsed = time.perf_counter() - t0
        c.check(f"{name} Inapplicable", rep.verdict.kind == VerdictKind.INAPPLICABLE, rep.verdict.kind.value)
        c.check(f"{name} reason", rep.verdict.reason == reason, rep.verdict.reason)
        c.check(f"{name} runtime < 5 s", elapsed < 5, f"{elapsed:.1f}s")
    tm = run_pipeline(spec("thue_morse"))
    c.check("Thue-Morse beta = 2", abs(tm.data["algebra"]["beta"] - 2) < 1e-12)
    mods = run_pipeline(spec("non_pisot")).data["pisot_family"]["max_conjugate_modulus"]
    c.check("non-Pisot conjugate modulus >= 1", mods >= 1, f"{mods:.4f}")
    c.finish()


def test_criterion_5_invariants():
    c = Criterion("5 invariants: intertwining, tile chains, digit counts, roots, det, lattice, inclusion, determinism")
    rng = np.random.default_rng(0)
    for name in PISOT_EXAMPLES:
        s, k = system(name), cps(name)
        ctx = s.field
        X = rng.integers(-1000, 1001, size=(1000, ctx.n))
        bx = np.array([ctx.times_beta(tuple(int(v) for v in row)) for row in X])
        err = float(np.max(np.abs(star_many(bx, k) - star_many(X, k) @ k.D.T)))
        c.check(f"{name} Psi(beta x) = D Psi(x)", err < 1e-9, f"{err:.2e}")
        c.check(f"{name} tile chains", validate_tile_equation(s.digits, s.lengths, ctx.beta(), s.beta_value))
        ok = all(
            np.array_equal(iterate_digit_sets(s.digits, M, ctx.beta()).counts(), np.linalg.matrix_power(s.matrix.S, M))
            for M in range(1, 5)
        )
        c.check(f"{name} #D^M = S^M for M <= 4", ok)
        roots = np.roots(list(reversed(s.min_poly.coeffs)))
        gap = float(np.min(np.abs(roots - s.matrix.perron_value)))
        c.check(f"{name} Perron value is a root", gap <= 1e-9, f"{gap:.2e}")
        dd = abs(abs(k.det_D) * k.beta - abs(ctx.constant_term))
        c.check(f"{name} |det D| beta = |p(0)|", dd <= 1e-9, f"{dd:.2e}")
        c.check(f"{name} lattice determinant > 1e-9", k.determinant > 1e-9)
        cert, _, _ = certificate(name, 20.0, 6)
        c.check(f"{name} certificate found", cert.found)
        if cert.found:
            big = xi(name, 20.0 * s.beta_value**cert.M * 2 + 20)
            c.check(f"{name} difference inclusion r = 10", bool(check_xi_difference_inclusion(big, cert.M, r=10.0)))
    a = run_pipeline(spec("tribonacci")).to_json()
    b = run_pipeline(spec("tribonacci")).to_json()
    c.check("byte-identical reports", a == b)
    c.finish()


def test_criterion_6_reports_label_bounds():
    c = Criterion("6 every report labels its (R, depth, M_max) bounds and finite-radius status")
    for name in ("fibonacci", "aab_abab", "thue_morse", "doubling", "non_pisot"):
        d = run_pipeline(spec(name)).data
        p = d.get("parameters", {})
        c.check(f"{name} bounds", all(p.get(k) is not None for k in ("radius", "depth", "m_max")), str(p))
        if "coincidence" in d:
            c.check(f"{name} certificate caveat", "not a proof" in d["coincidence"]["note"])
            c.check(f"{name} checked radius", d["coincidence"]["radius_checked"] == p["radius"])
        if "model_set_inclusions" in d:
            inc = d["model_set_inclusions"]
            c.check(f"{name} inclusion bounds", inc["depth"] == p["depth"] and inc["radius"] > 0)
    c.finish()
