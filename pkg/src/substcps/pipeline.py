"""End-to-end run: substitution -> point sets -> CPS -> coincidence -> windows -> verdict."""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .algebra import pisot_family_check
from .coincidence import check_xi_difference_inclusion, find_K_for_E_delta, search_coincidence
from .cps import build_cps, default_delta, density_probe
from .errors import (
    EmptyInternalSpace,
    NotFound,
    NotPrimitive,
    PatchTooSmall,
    RankDeficient,
    SizeLimit,
    SubstCPSError,
)
from .pointset import (
    compute_xi,
    find_seed,
    generate_patch,
    grow_patch_to_counts,
    meyer_flc_probe,
    module_analysis,
)
from .substitution import SubstitutionSpec, build_system, load_spec, parse_spec
from .window import (
    attractor_by_iteration,
    attractor_by_projection,
    build_dual_ifs,
    hausdorff_cells,
    overlap_report,
    regularity_report,
    verify_model_set,
)

log = logging.getLogger(__name__)

__all__ = ["VerdictKind", "Verdict", "PipelineOptions", "VerdictReport", "run_pipeline", "EXIT_CODES", "jsonable"]


class VerdictKind(str, enum.Enum):
    REGULAR = "RegularEuclideanModelSetEvidence"
    OVERLAP = "WindowOverlap"
    NO_CERTIFICATE = "NoCoincidenceCertificate"
    INAPPLICABLE = "Inapplicable"
    INCONCLUSIVE = "Inconclusive"


EXIT_CODES = {
    VerdictKind.REGULAR: 0,
    VerdictKind.OVERLAP: 2,
    VerdictKind.NO_CERTIFICATE: 3,
    VerdictKind.INAPPLICABLE: 4,
    VerdictKind.INCONCLUSIVE: 5,
}


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    reason: str = ""

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.kind]

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "reason": self.reason}


@dataclass(frozen=True)
class PipelineOptions:
    radius: float | None = None  # coincidence check radius; default 200 * longest tile
    depth: int | None = None  # window grid depth; default 9 (1-D) or 8 (2-D+)
    m_max: int | None = None
    seed: int = 0
    margin: int = 2
    verify_radius: float = 200.0
    oversample: int = 1
    projection: bool = True
    density_samples: int = 100
    density_eps: float | None = None
    overlap_tol: float = 0.01
    max_points: int = 3_000_000
    regularity_depths: int = 4


@dataclass
class VerdictReport:
    data: dict
    verdict: Verdict
    artifacts: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def exit_code(self) -> int:
        return self.verdict.exit_code

    def to_json(self) -> str:
        return json.dumps(jsonable(self.data), sort_keys=True, indent=2) + "\n"


def jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, enum.Enum):
        return x.value
    return x


def run_pipeline(spec: SubstitutionSpec | str | Path | dict, options: PipelineOptions | None = None) -> VerdictReport:
    opts = options or PipelineOptions()
    if isinstance(spec, (str, Path)):
        spec = load_spec(spec)
    elif isinstance(spec, dict):
        spec = parse_spec(spec)

    data: dict[str, Any] = {"spec": spec.to_dict()}
    notes: list[str] = []
    stages: list[str] = []
    artifacts: dict[str, Any] = {"spec": spec}
    # bounds are labelled even when a gate stops the run early
    data["parameters"] = {
        "radius": opts.radius or spec.param("radius"),
        "depth": opts.depth or spec.param("grid_depth"),
        "m_max": int(opts.m_max or spec.param("m_max")),
        "seed": opts.seed,
        "margin": opts.margin,
        "verify_radius": opts.verify_radius,
        "oversample": opts.oversample,
    }

    def finish(kind: VerdictKind, reason: str = "") -> VerdictReport:
        verdict = Verdict(kind, reason)
        data["verdict"] = verdict.to_dict()
        data["notes"] = notes
        data["stages_completed"] = stages
        return VerdictReport(data, verdict, artifacts)

    stage = "substitution"
    try:
        # substitution, field, roots
        try:
            system = build_system(spec)
        except NotPrimitive as e:
            data["substitution"] = {"primitive": False, "detail": str(e)}
            return finish(VerdictKind.INAPPLICABLE, "substitution is not primitive")
        artifacts["system"] = system
        sub = system.matrix
        lens = system.length_values()
        R = float(opts.radius or spec.param("radius") or 200.0 * float(lens.max()))
        m_max = data["parameters"]["m_max"]
        depth = int(opts.depth or spec.param("grid_depth") or (9 if system.embedding.internal_dim <= 1 else 8))
        data["parameters"].update(radius=R, depth=depth)
        data["substitution"] = {
            "primitive": True,
            "primitivity_exponent": system.primitivity_exponent,
            "matrix": sub.S.tolist(),
            "perron_value": sub.perron_value,
            "lengths": [str(x) for x in system.lengths],
            "length_values": system.length_values().tolist(),
            "digit_counts": system.digits.counts().tolist(),
        }
        stages.append("substitution")

        stage = "algebra"
        emb = system.embedding
        ctx = system.field
        pisot = pisot_family_check(emb, tol=float(spec.param("tol")))
        data["algebra"] = {
            "min_poly": list(system.min_poly.coeffs),
            "degree": ctx.n,
            "beta": emb.beta,
            "conjugate_real_roots": list(emb.conjugate_real_roots),
            "conjugate_complex_roots": [[z.real, z.imag] for z in emb.complex_roots],
            "root_residual": emb.residual,
        }
        data["unimodular"] = ctx.unimodular
        data["constant_term"] = ctx.constant_term
        data["pisot_family"] = {
            "holds": pisot.holds,
            "margin": pisot.margin,
            "max_conjugate_modulus": pisot.max_conjugate_modulus,
        }
        if not ctx.unimodular:
            notes.append("non-unimodular expansion")
        stages.append("algebra")
        if not pisot.holds:
            return finish(VerdictKind.INAPPLICABLE, "Pisot family condition fails")

        # control points and return set
        stage = "pointset"
        seed = find_seed(spec)
        patch = generate_patch(system, seed, 4 * R, max_points=opts.max_points)
        xi = compute_xi(patch, R)
        pdata: dict[str, Any] = {
            "seed": seed.describe(spec.letters),
            "patch_points": len(patch),
            "patch_radius": patch.radius,
            "control_points_integral": patch.integral,
            "xi_radius": xi.radius,
            "xi_size": len(xi),
        }
        if not patch.integral:
            notes.append("control points not in Z[beta]; rigidity map assumed to be the identity")
        index = None
        hnf = None
        try:
            ma = module_analysis(xi)
            index, hnf = ma.index_in_L, ma.hnf_basis
            pdata.update(
                index_in_L=ma.index_in_L,
                generates_L=ma.generates_L,
                index_stable=ma.stabilized,
                index_radii=list(ma.radii),
                hnf_basis=[[int(v) for v in row] for row in ma.hnf_basis.tolist()],
            )
            if not ma.generates_L:
                notes.append(f"return vectors generate a sublattice of index {ma.index_in_L}")
        except RankDeficient as e:
            pdata["index_in_L"] = None
            notes.append(f"module analysis: {e}")
        meyer = meyer_flc_probe(patch, xi, radius=min(50.0, R))
        pdata["meyer"] = {
            "radius": meyer.radius,
            "min_gap_support": meyer.min_gap_support,
            "min_gap_xi_differences": meyer.min_gap_xi_differences,
            "local_radius": meyer.local_radius,
            "local_configurations": meyer.local_configurations,
            "note": meyer.note,
        }
        data["pointset"] = pdata
        stages.append("pointset")

        # cut-and-project scheme
        stage = "cps"
        try:
            cps = build_cps(ctx, emb)
        except EmptyInternalSpace:
            data["cps"] = {"internal_dim": 0}
            return finish(VerdictKind.INAPPLICABLE, "empty internal space")
        artifacts["cps"] = cps
        d = cps.internal_dim
        eps = opts.density_eps or (1e-2 if d == 1 else 5e-2)
        delta_star = default_delta(xi.coeffs, cps, xi.den)
        data["cps"] = dict(
            cps.to_dict(),
            det_D=cps.det_D,
            density_probe={
                "samples": opts.density_samples,
                "eps": eps,
                "hit_rate": density_probe(cps, opts.density_samples, eps, seed=opts.seed),
            },
            delta_star=delta_star,
        )
        stages.append("cps")

        # algebraic coincidence
        stage = "coincidence"
        cert = None
        while True:
            try:
                cert = search_coincidence(patch, xi, m_max=m_max, radius=R)
                break
            except PatchTooSmall as e:
                need = getattr(e, "needed_radius", None)
                if need is None:
                    raise
                try:
                    patch = generate_patch(system, seed, need * 1.01, max_points=opts.max_points)
                except SizeLimit:
                    notes.append(f"coincidence search stopped at M={e.M - 1}: patch budget exhausted")
                    cert = search_coincidence(patch, xi, m_max=e.M - 1, radius=R) if e.M > 1 else None
                    break
        cdata: dict[str, Any] = cert.to_dict() if cert is not None else {"found": False, "m_max": 0}
        data["coincidence"] = cdata
        stages.append("coincidence")
        if cert is None or not cert.found:
            return finish(
                VerdictKind.NO_CERTIFICATE,
                f"no algebraic coincidence with M <= {m_max} on Xi within {R:g}",
            )
        incl = check_xi_difference_inclusion(xi, cert.M, r=min(10.0, xi.radius))
        cdata["difference_inclusion"] = {"r": incl.r, "holds": incl.holds, "pairs_checked": incl.pairs_checked}
        k_radius = 20.0
        xi_k = compute_xi(patch.restrict(min(patch.radius, 3 * 400.0)), min(400.0, patch.radius))
        try:
            kres = find_K_for_E_delta(xi_k, cps, delta_star, K_max=12, radius=k_radius)
            cdata["E_delta"] = {"K": kres.K, "delta": kres.delta, "radius": kres.radius, "points": kres.points}
        except (NotFound, PatchTooSmall) as e:
            cdata["E_delta"] = {"K": None, "delta": delta_star, "radius": k_radius, "detail": str(e)}
            notes.append(f"no K with beta^K E_delta inside Xi: {e}")

        # windows
        stage = "window"
        ifs = build_dual_ifs(system.digits, cps)
        wa = attractor_by_iteration(ifs, depth, oversample=opts.oversample)
        artifacts["ifs"] = ifs
        artifacts["window"] = wa
        wdata: dict[str, Any] = {
            "depth": depth,
            "oversample": opts.oversample,
            "contraction": ifs.contraction,
            "S_star": ifs.S_star.tolist(),
            "cells": wa.counts(),
            "measures": wa.measures(),
        }
        if opts.projection:
            per_letter = [max(1000, int(2 * m / wa.cell_volume)) for m in wa.measures()]
            ppatch = grow_patch_to_counts(system, seed, per_letter, patch, opts.max_points)
            try:
                pr = attractor_by_projection(ppatch, cps, depth)
                artifacts["projection"] = pr
                wdata["projection"] = {
                    "points": len(ppatch),
                    "cells": pr.counts(),
                    "hausdorff_cells": [hausdorff_cells(wa, pr, i) for i in range(system.digits.kappa)],
                }
            except SubstCPSError as e:
                wdata["projection"] = {"error": str(e)}
        ov = overlap_report(wa)
        wdata["overlap"] = ov.to_dict()
        fine = wa.finest()
        lo_depth = max(fine.depth - opts.regularity_depths, 1)
        covers = [fine.coarsen(g) for g in range(lo_depth, depth + 1)]
        reg = regularity_report(covers, ifs)
        wdata["regularity"] = reg.to_dict()
        data["windows"] = wdata
        data["overlap"] = ov.to_dict()
        data["regularity"] = reg.to_dict()
        stages.append("window")

        stage = "verify"
        vpatch = patch if patch.radius >= opts.verify_radius else generate_patch(system, seed, opts.verify_radius)
        check = verify_model_set(vpatch, wa, cps, margin=opts.margin, radius=opts.verify_radius, basis=hnf)
        data["model_set_inclusions"] = check.to_dict()
        stages.append("verify")
        artifacts["patch"] = vpatch

        if ov.max_overlap > 0 and ov.relative_max_overlap > opts.overlap_tol:
            i, j = _worst_pair(ov.overlaps)
            return finish(
                VerdictKind.OVERLAP,
                f"windows of {spec.letters[i]!r} and {spec.letters[j]!r} share interior "
                f"(eroded overlap {ov.overlaps[i][j]:.6g} at depth {depth})",
            )
        problems = []
        if not reg.regular_evidence:
            problems.append("boundary volume does not decrease with depth")
        if check.total_exceptions:
            problems.append(f"{check.total_exceptions} model-set inclusion exceptions")
        if not incl.holds:
            problems.append("scaled return differences leave Xi")
        if problems:
            return finish(VerdictKind.INCONCLUSIVE, "; ".join(problems))
        return finish(
            VerdictKind.REGULAR,
            f"coincidence at M={cert.M} (radius {R:g}), disjoint windows and clean inclusions "
            f"at depth {depth} over |x| <= {check.radius:g}",
        )
    except SubstCPSError as e:
        e.pipeline_stage = stage
        raise


def _worst_pair(ov: list[list[float]]) -> tuple[int, int]:
    k = len(ov)
    best, pair = -1.0, (0, 1)
    for i in range(k):
        for j in range(i + 1, k):
            if ov[i][j] > best:
                best, pair = ov[i][j], (i, j)
    return pair
