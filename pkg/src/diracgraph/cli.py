"""Command-line front end.

All quantities are nondimensional: ``m`` is the particle mass, ``c`` the
speed of light, lengths are in the units of the graph file and ``h`` is the
target grid spacing in the same units.  Results are printed as JSON.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .errors import ConfigError, DiracGraphError
from .graph import STOCK_GRAPHS
from .mesh import build_mesh
from .operators import assemble_dirac
from .spectral import GAP_TOL, eigendecompose

log = logging.getLogger("diracgraph")

UNITS = (
    "Units: all quantities are nondimensional. --m is the mass, --c the speed of light, "
    "--h the grid spacing and --L the truncation length of every half-line, both in graph length units."
)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=lambda o: o.item() if isinstance(o, np.generic) else str(o)))


def _settings(args) -> dict:
    """Config file values overridden by any inline flag that was given."""
    from .sweep import default_config, load_config

    cfg = default_config()
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    inline = {
        "graph": getattr(args, "graph", None),
        "m": getattr(args, "m", None),
        "p": getattr(args, "p", None),
        "h": getattr(args, "h", None),
        "trunc_length": getattr(args, "L", None),
        "seed": getattr(args, "seed", None),
        "out_dir": getattr(args, "out_dir", None),
        "c_list": getattr(args, "c_list", None),
    }
    for k, v in inline.items():
        if v is not None:
            cfg[k] = v
    if getattr(args, "c", None) is not None:
        cfg["c_list"] = [args.c]
    return cfg


def _graph(cfg):
    from .sweep import resolve_graph

    return resolve_graph(cfg["graph"])


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate_graph(args) -> int:
    from .sweep import resolve_graph

    g = resolve_graph(args.graph_file)
    _emit(
        {
            "vertices": len(g.vertices),
            "bounded_edges": len(g.bounded_edges),
            "half_lines": g.half_line_count,
            "core_length": g.core_length,
            "degrees": {v: g.degree(v) for v in g.vertices},
        }
    )
    return 0


def cmd_spectrum(args) -> int:
    cfg = _settings(args)
    c = cfg["c_list"][-1]
    mesh = build_mesh(_graph(cfg), cfg["h"], cfg["trunc_length"])
    op = assemble_dirac(mesh, None, cfg["m"], c)
    dec = eigendecompose(op, method=args.method)
    mc2 = cfg["m"] * c * c
    if dec.eigenvalues is not None:
        ev = np.sort(dec.eigenvalues)
        pos, neg = ev[ev > 0][: args.k], ev[ev < 0][::-1][: args.k]
    else:
        near = np.sort(dec.window(2 * args.k))
        pos, neg = near[near > 0][: args.k], near[near < 0][::-1][: args.k]
    gap = float(min(np.min(np.abs(pos)), np.min(np.abs(neg))))
    _emit(
        {
            "dim": op.dim,
            "method": dec.method,
            "mc2": mc2,
            "lowest_positive": pos.tolist(),
            "highest_negative": neg.tolist(),
            "gap_ok": gap >= mc2 * (1 - GAP_TOL),
        }
    )
    return 0


def cmd_solve_nlse(args) -> int:
    from .nlse import SIGN_CONVENTION, solve_nlse

    cfg = _settings(args)
    sol = solve_nlse(_graph(cfg), cfg["m"], cfg["p"], mass=args.mass, h=cfg["h"],
                     L=None if args.auto_L else cfg["trunc_length"])
    _emit(
        {
            "lambda": sol.lam,
            "energy": sol.energy,
            "mass": sol.mass,
            "residual": sol.residual,
            "kirchhoff": sol.kirchhoff,
            "L": sol.mesh.trunc_length,
            "sign_convention": SIGN_CONVENTION,
        }
    )
    return 0


def cmd_solve_nlde(args) -> int:
    from .nlde import component_norms, continuation
    from .nlse import solve_nlse

    cfg = _settings(args)
    nlse = solve_nlse(_graph(cfg), cfg["m"], cfg["p"], h=cfg["h"], L=cfg["trunc_length"])
    sols = continuation(nlse, cfg["c_list"], relation=args.relation, lower=args.lower)
    out = []
    for s in sols:
        out.append({"c": s.c, "omega": s.omega, "omega_minus_mc2": s.omega_minus_mc2, "residual": s.residual,
                    "newton_iters": s.newton_iters, "action": s.action, **component_norms(s, nlse.g)})
    _emit({"lambda": nlse.lam, "solutions": out})
    return 0


def cmd_sweep(args) -> int:
    from .sweep import emit_report, run_sweep

    cfg = _settings(args)
    report = run_sweep(cfg, lower=args.lower, relation=args.relation)
    out = emit_report(report, plot=not args.no_plot)
    _emit({"out_dir": str(out), "rows": len(report.rows), "slope_h1_u2": report.slope,
           "lambda": report.lam, "status": "failed" if report.failed else "ok"})
    return 1 if report.failed else 0


def cmd_estimate_ec(args) -> int:
    from .nlde import SolverParams, estimate_ec

    cfg = _settings(args)
    c = cfg["c_list"][-1]
    params = SolverParams(m=cfg["m"], c=c, p=cfg["p"], h=cfg["h"], L=cfg["trunc_length"])
    mesh = build_mesh(_graph(cfg), cfg["h"], cfg["trunc_length"])
    dec = eigendecompose(assemble_dirac(mesh, None, cfg["m"], c), method="dense")
    e = estimate_ec(dec, params, family=args.family, a=args.a, n_grid=args.n_grid)
    half = e.threshold_half
    _emit(
        {
            "family": e.family, "c": c, "estimate_minus_half_mc2": e.estimate - half,
            "bound_minus_half_mc2": e.bound - half, "literal_bound_minus_half_mc2": e.literal_bound - half,
            "slack": e.slack, "t_star": e.t_star, "t_max": e.t_max, "monotone": e.monotone,
        }
    )
    return 0


def cmd_check_inequalities(args) -> int:
    from .inequalities import FieldSampler, check_projector_bound, check_support_inequality, estimate_gn_constants

    cfg = _settings(args)
    c = cfg["c_list"][-1]
    mesh = build_mesh(_graph(cfg), cfg["h"], cfg["trunc_length"])
    dec = eigendecompose(assemble_dirac(mesh, None, cfg["m"], c), method="dense")
    p, n, seed = cfg["p"], args.samples, cfg["seed"]
    reports = [check_support_inequality(mesh, FieldSampler(mesh, seed).batch(n), p)]
    gn = estimate_gn_constants(mesh, dec, p, samples=n, seed=seed)
    reports += list(gn.values())
    if c * cfg["m"] >= 1:
        reports.append(check_projector_bound(dec, p, gn["S_p"].max_ratio, samples=n, seed=seed + 1))
    _emit([{"inequality": r.inequality, "samples": r.samples, "max_ratio": r.max_ratio,
            "violations": r.violations, "reference": r.reference} for r in reports])
    return 0 if all(r.violations == 0 for r in reports) else 1


# ---------------------------------------------------------------------------
# parser


def _common(sp, c=True, p=True):
    sp.add_argument("--config", help="JSON config (keys: " + ", ".join(
        ("graph", "m", "p", "c_list", "h", "trunc_length", "seed", "out_dir")) + "); inline flags override it")
    sp.add_argument("--graph", help=f"GraphSpec JSON file or stock name ({', '.join(STOCK_GRAPHS)})")
    sp.add_argument("--m", type=float, help="mass m > 0")
    if p:
        sp.add_argument("--p", type=float, help="nonlinearity exponent, 2 < p < 6")
    if c:
        sp.add_argument("--c", type=float, help="speed of light c > 0")
    sp.add_argument("--h", type=float, help="grid spacing (graph length units)")
    sp.add_argument("--L", type=float, help="half-line truncation length (graph length units)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diracgraph", description=__doc__.split("\n\n")[0], epilog=UNITS)
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate-graph", help="parse and check a GraphSpec file", epilog=UNITS)
    sp.add_argument("graph_file", help="GraphSpec JSON file or stock name")
    sp.set_defaults(func=cmd_validate_graph)

    sp = sub.add_parser("spectrum", help="eigenvalues of the Dirac matrix next to the gap", epilog=UNITS)
    _common(sp, p=False)
    sp.add_argument("--k", type=int, default=5, help="eigenvalues to show on each side")
    sp.add_argument("--method", choices=("auto", "dense", "sign"), default="auto")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("solve-nlse", help="normalized Schroedinger solution", epilog=UNITS)
    _common(sp, c=False)
    sp.add_argument("--mass", type=float, default=1.0, help="prescribed L2 mass")
    sp.add_argument("--auto-L", action="store_true", help="choose L from the decay rate")
    sp.set_defaults(func=cmd_solve_nlse)

    for name, fn, hlp in (
        ("solve-nlde", cmd_solve_nlde, "normalized Dirac solutions by continuation in c"),
        ("sweep", cmd_sweep, "nonrelativistic-limit sweep with CSV, manifest and plot script"),
    ):
        sp = sub.add_parser(name, help=hlp, epilog=UNITS)
        _common(sp)
        sp.add_argument("--c-list", dest="c_list", type=float, nargs="+", help="ascending c values")
        sp.add_argument("--relation", choices=("literal", "expansion"), default="literal",
                        help="frequency seed: lambda/m ('literal') or lambda/(2m) ('expansion')")
        sp.add_argument("--lower", choices=("strong", "natural"), default="strong",
                        help="vertex condition of the lower component")
        if name == "sweep":
            sp.add_argument("--seed", type=int)
            sp.add_argument("--out-dir", dest="out_dir")
            sp.add_argument("--no-plot", action="store_true", help="skip the gnuplot script")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("estimate-ec", help="sampled upper estimate of the minimax level", epilog=UNITS)
    _common(sp)
    sp.add_argument("--family", choices=("sine", "tent"), default="sine")
    sp.add_argument("--a", type=float, help="tent slope (tent family; needs 1/a <= L)")
    sp.add_argument("--n-grid", dest="n_grid", type=int, default=128, help="samples along the ray")
    sp.set_defaults(func=cmd_estimate_ec)

    sp = sub.add_parser("check-inequalities", help="randomised inequality suites", epilog=UNITS)
    _common(sp)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_check_inequalities)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DiracGraphError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
