"""Command-line front end.

Exit codes: 0 regular model set evidence, 2 window overlap, 3 no coincidence
certificate, 4 inapplicable, 5 inconclusive, 1 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .coincidence import search_coincidence
from .cps import build_cps, default_delta, density_probe
from .errors import PatchTooSmall, SchemaError, SubstCPSError
from .pipeline import PipelineOptions, run_pipeline, jsonable
from .pointset import compute_xi, find_seed, generate_patch, grow_patch_to_counts, module_analysis
from .render import cells_csv, points_csv, window_svg, write_text, xi_csv
from .substitution import build_system, load_spec
from .window import (
    attractor_by_iteration,
    attractor_by_projection,
    build_dual_ifs,
    hausdorff_cells,
)

log = logging.getLogger("substcps")


def shipped_specs() -> list[str]:
    data = resources.files("substcps").joinpath("data")
    return sorted(p.name[:-5] for p in data.iterdir() if p.name.endswith(".json") and "schema" not in p.name)


def resolve_spec(name: str):
    p = Path(name)
    if p.exists():
        return load_spec(p)
    res = resources.files("substcps").joinpath("data", f"{name}.json")
    if res.is_file():
        with resources.as_file(res) as f:
            return load_spec(f)
    raise SchemaError(f"no spec file or shipped example named {name!r} (shipped: {', '.join(shipped_specs())})", name)


def _dump(obj, path: str | None) -> None:
    text = json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"
    write_text(path or "-", text)


def _options(args) -> PipelineOptions:
    return PipelineOptions(
        radius=args.radius,
        depth=args.depth,
        m_max=args.m_max,
        seed=args.seed,
        margin=getattr(args, "margin", 2),
    )


def _system(args):
    spec = resolve_spec(args.spec)
    return spec, build_system(spec)


def cmd_validate(args) -> int:
    spec, system = _system(args)
    out = {
        "name": spec.name,
        "letters": list(spec.letters),
        "matrix": system.matrix.S.tolist(),
        "primitivity_exponent": system.primitivity_exponent,
        "min_poly": list(system.min_poly.coeffs),
        "beta": system.beta_value,
        "unimodular": system.field.unimodular,
        "lengths": [str(x) for x in system.lengths],
        "digit_sets": [[[str(a) for a in system.digits.D[i][j]] for j in range(spec.kappa)] for i in range(spec.kappa)],
        "tile_equation": "ok",
    }
    _dump(out, args.json)
    return 0


def cmd_points(args) -> int:
    spec, system = _system(args)
    patch = generate_patch(system, find_seed(spec), args.radius or 10.0)
    write_text(args.csv or "-", points_csv(patch.restrict(args.radius or 10.0)))
    return 0


def cmd_xi(args) -> int:
    spec, system = _system(args)
    r = args.radius or 20.0
    patch = generate_patch(system, find_seed(spec), 4 * r)
    xi = compute_xi(patch, r)
    write_text(args.csv or "-", xi_csv(xi))
    if args.json:
        ma = module_analysis(xi)
        _dump(
            {
                "radius": r,
                "size": len(xi),
                "hnf_basis": [[int(v) for v in row] for row in ma.hnf_basis.tolist()],
                "index_in_L": ma.index_in_L,
                "index_stable": ma.stabilized,
            },
            args.json,
        )
    return 0


def cmd_cps(args) -> int:
    spec, system = _system(args)
    cps = build_cps(system.field, system.embedding)
    r = args.radius or 20.0
    xi = compute_xi(generate_patch(system, find_seed(spec), 4 * r), r)
    out = dict(cps.to_dict())
    out["delta_star"] = default_delta(xi.coeffs, cps, xi.den)
    eps = 1e-2 if cps.internal_dim == 1 else 5e-2
    out["density_probe"] = {"eps": eps, "hit_rate": density_probe(cps, 100, eps, seed=args.seed)}
    _dump(out, args.json)
    return 0


def cmd_coincidence(args) -> int:
    spec, system = _system(args)
    seed = find_seed(spec)
    r = args.radius or 20.0
    m_max = args.m_max or int(spec.param("m_max"))
    patch = generate_patch(system, seed, 4 * r)
    xi = compute_xi(patch, r)
    while True:
        try:
            cert = search_coincidence(patch, xi, m_max=m_max, radius=r, r_cand=args.candidates)
            break
        except PatchTooSmall as e:
            patch = generate_patch(system, seed, e.needed_radius * 1.01)
    _dump(cert.to_dict(), args.json)
    return 0 if cert.found else 3


def cmd_window(args) -> int:
    spec, system = _system(args)
    cps = build_cps(system.field, system.embedding)
    depth = args.depth or (9 if cps.internal_dim == 1 else 8)
    covers = {}
    if args.route in ("ifs", "both"):
        covers["ifs"] = attractor_by_iteration(build_dual_ifs(system.digits, cps), depth)
    if args.route in ("projection", "both"):
        seed = find_seed(spec)
        if args.radius:
            patch = generate_patch(system, seed, args.radius)
        else:
            ref = covers.get("ifs")
            per = [max(1000, int(2 * m / ref.cell_volume)) for m in ref.measures()] if ref else [1000] * spec.kappa
            patch = grow_patch_to_counts(system, seed, per)
        covers["projection"] = attractor_by_projection(patch, cps, depth)
    main = covers.get("ifs") or covers["projection"]
    if args.svg:
        write_text(args.svg, window_svg(main, title=spec.name or ""))
    if args.csv:
        write_text(args.csv, cells_csv(main))
    out = {
        "depth": depth,
        "routes": {k: {"cells": w.counts(), "measures": w.measures()} for k, w in covers.items()},
    }
    if len(covers) == 2:
        out["hausdorff_cells"] = [hausdorff_cells(covers["ifs"], covers["projection"], i) for i in range(spec.kappa)]
    _dump(out, args.json)
    return 0


VERIFY_KEYS = ("unimodular", "pisot_family", "coincidence", "overlap", "regularity", "model_set_inclusions", "verdict")


def cmd_verify(args) -> int:
    report = run_pipeline(resolve_spec(args.spec), _options(args))
    _dump({k: report.data[k] for k in VERIFY_KEYS if k in report.data}, args.json)
    return report.exit_code


def cmd_report(args) -> int:
    report = run_pipeline(resolve_spec(args.spec), _options(args))
    write_text(args.json or "-", report.to_json())
    if args.svg and "window" in report.artifacts:
        write_text(args.svg, window_svg(report.artifacts["window"], title=report.data["spec"].get("name", "")))
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("spec", help="spec file or the name of a shipped example")
    shared.add_argument("--radius", type=float, default=None, help="physical radius R")
    shared.add_argument("--depth", type=int, default=None, help="dyadic grid depth for windows")
    shared.add_argument("--m-max", dest="m_max", type=int, default=None, help="largest coincidence exponent M")
    shared.add_argument("--seed", type=int, default=0, help="random seed for the density probe")
    shared.add_argument("--json", default=None, metavar="PATH", help="write JSON here ('-' for stdout)")
    shared.add_argument("--svg", default=None, metavar="PATH", help="write an SVG window figure here")

    p = argparse.ArgumentParser(prog="substcps", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[shared], help="check a spec and its tile equation").set_defaults(func=cmd_validate)
    sp = sub.add_parser("points", parents=[shared], help="control points as CSV")
    sp.add_argument("--csv", default=None, metavar="PATH")
    sp.set_defaults(func=cmd_points)
    sp = sub.add_parser("xi", parents=[shared], help="return vectors as CSV, module index as JSON")
    sp.add_argument("--csv", default=None, metavar="PATH")
    sp.set_defaults(func=cmd_xi)
    sub.add_parser("cps", parents=[shared], help="cut-and-project data as JSON").set_defaults(func=cmd_cps)
    sp = sub.add_parser("coincidence", parents=[shared], help="search for algebraic coincidence")
    sp.add_argument("--candidates", type=float, default=None, metavar="R", help="candidate radius r_cand")
    sp.set_defaults(func=cmd_coincidence)
    sp = sub.add_parser("window", parents=[shared], help="window covers")
    sp.add_argument("--route", choices=("ifs", "projection", "both"), default="ifs")
    sp.add_argument("--csv", default=None, metavar="PATH")
    sp.set_defaults(func=cmd_window)
    sp = sub.add_parser("verify", parents=[shared], help="run everything, print the verdict summary")
    sp.add_argument("--margin", type=int, default=2)
    sp.set_defaults(func=cmd_verify)
    sp = sub.add_parser("report", parents=[shared], help="run everything, print the full report")
    sp.add_argument("--margin", type=int, default=2)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SubstCPSError as e:
        stage = getattr(e, "pipeline_stage", None) or e.stage
        print(f"error [{stage}]: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error [io]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
