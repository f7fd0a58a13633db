"""Nonrelativistic-limit sweep: one Schroedinger solve, one Dirac solve per ``c``."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import ConfigError, DiracGraphError, EmptySweep, InsufficientData, IoError
from .graph import STOCK_GRAPHS, MetricGraph, load_graph
from .nlde import component_norms, solve_nlde, initial_guess
from .nlse import SIGN_CONVENTION, solve_nlse
from .operators import assemble_dirac, constraint_basis

CONFIG_KEYS = ("graph", "m", "p", "c_list", "h", "trunc_length", "seed", "out_dir")
COLUMNS = (
    "c", "omega", "omega_minus_mc2", "l2_u2", "h1_u2", "h1_u1_minus_g", "action", "residual", "newton_iters",
)
NLSE_TOL = 1e-10
NLDE_TOL = 1e-10
CSV_NAME = "sweep.csv"
MANIFEST_NAME = "manifest.json"
PLOT_NAME = "sweep.gp"


def default_config() -> dict:
    """Line graph, ``m = 1``, ``p = 3``, ``c`` in {10, 20, 40, 80}."""
    return {
        "graph": "line",
        "m": 1.0,
        "p": 3.0,
        "c_list": [10.0, 20.0, 40.0, 80.0],
        "h": 1e-3,
        "trunc_length": 46.0,
        "seed": 0,
        "out_dir": "sweep_out",
    }


def validate_config(raw: dict) -> dict:
    """Check keys and types; returns a normalised copy."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = set(CONFIG_KEYS) - set(raw)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    cfg = dict(raw)
    try:
        for k in ("m", "p", "h", "trunc_length"):
            cfg[k] = float(cfg[k])
        cfg["c_list"] = [float(c) for c in cfg["c_list"]]
        cfg["seed"] = int(cfg["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if not isinstance(cfg["graph"], str) or not isinstance(cfg["out_dir"], str):
        raise ConfigError("graph and out_dir must be strings")
    if not cfg["c_list"]:
        raise EmptySweep("c_list is empty")
    if any(b <= a for a, b in zip(cfg["c_list"], cfg["c_list"][1:])):
        raise ConfigError("c_list must be strictly ascending")
    if min(cfg["c_list"]) <= 0 or cfg["m"] <= 0 or cfg["h"] <= 0 or cfg["trunc_length"] <= 0:
        raise ConfigError("m, h, trunc_length and every c must be positive")
    return cfg


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = validate_config(raw)
    # graph files are resolved relative to the config file
    if cfg["graph"] not in STOCK_GRAPHS and not Path(cfg["graph"]).is_absolute():
        cfg["graph"] = str(path.parent / cfg["graph"])
    return cfg


def resolve_graph(name: str) -> MetricGraph:
    """Stock graph name (``line``, ``interval``, ``star3``, ``figure``) or GraphSpec path."""
    if name in STOCK_GRAPHS:
        return STOCK_GRAPHS[name]()
    try:
        return load_graph(name)
    except OSError as exc:
        raise IoError(str(exc)) from exc


@dataclass(frozen=True)
class SweepRow:
    c: float
    omega: float
    omega_minus_mc2: float
    l2_u2: float
    h1_u2: float
    h1_u1_minus_g: float
    action: float
    residual: float
    newton_iters: int


@dataclass
class SweepReport:
    config: dict
    rows: list[SweepRow]
    lam: float
    energy: float
    slope: float | None
    failed: bool = False
    failure: dict | None = None
    wall_clock: float = 0.0
    lower: str = "strong"
    extra: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def fit_rate(series) -> float:
    """Least-squares slope of ``log value`` against ``log c``."""
    pts = [(float(c), float(v)) for c, v in series]
    if len(pts) < 3:
        raise InsufficientData(f"need at least 3 points, got {len(pts)}")
    if any(not (c > 0 and v > 0) for c, v in pts):
        raise InsufficientData("all abscissae and values must be positive")
    x = np.log([c for c, _ in pts])
    y = np.log([v for _, v in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def run_sweep(config: dict, *, lower: str = "strong", relation: str = "literal") -> SweepReport:
    """Solve the limit problem once, then the Dirac problem for every ``c``.

    Dirac solves run from the largest ``c`` down, each warm-started from the
    previous one; rows are reported in ascending ``c``.  A solver error stops
    the sweep and the report is marked failed with the rows obtained so far.
    ``lower`` selects the vertex condition of the lower spinor component.
    """
    cfg = validate_config(config)
    t0 = time.perf_counter()
    graph = resolve_graph(cfg["graph"])
    m, p = cfg["m"], cfg["p"]
    nlse = solve_nlse(graph, m, p, h=cfg["h"], L=cfg["trunc_length"], tol=NLSE_TOL)
    mesh = nlse.mesh
    basis = mesh.constraints if lower == "strong" else constraint_basis(mesh, lower=lower)

    rows: dict[float, SweepRow] = {}
    failure = None
    prev = None
    for c in sorted(cfg["c_list"], reverse=True):
        try:
            op = assemble_dirac(mesh, basis, m, c)
            if prev is None:
                guess, omega0 = initial_guess(nlse, m, c, op, relation=relation)
            else:
                guess, omega0 = prev.y, m * c * c + prev.omega_minus_mc2
            sol = solve_nlde(op, p, guess, omega0, tol=NLDE_TOL)
        except DiracGraphError as exc:
            failure = {"c": c, "error": type(exc).__name__, "message": str(exc)}
            break
        norms = component_norms(sol, nlse.g)
        rows[c] = SweepRow(
            c=c, omega=sol.omega, omega_minus_mc2=sol.omega_minus_mc2, l2_u2=norms["l2_u2"],
            h1_u2=norms["h1_u2"], h1_u1_minus_g=norms["h1_u1_minus_g"], action=sol.action,
            residual=sol.residual, newton_iters=int(sol.newton_iters),
        )
        prev = sol

    ordered = [rows[c] for c in sorted(rows)]
    slope = None
    if len(ordered) >= 3:
        slope = fit_rate([(r.c, r.h1_u2) for r in ordered])
    return SweepReport(
        config=cfg, rows=ordered, lam=nlse.lam, energy=nlse.energy, slope=slope,
        failed=failure is not None, failure=failure, wall_clock=time.perf_counter() - t0, lower=lower,
        extra={"nlse_residual": nlse.residual, "kirchhoff": nlse.kirchhoff, "relation": relation},
    )


def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else format(float(v), ".17g")


def write_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in COLUMNS])


def read_csv(path: str | Path) -> list[SweepRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != COLUMNS:
            raise ConfigError(f"unexpected CSV header {header}")
        return [
            SweepRow(*[float(x) for x in rec[:-1]], int(rec[-1])) for rec in rd
        ]


def plot_script(csv_name: str = CSV_NAME) -> str:
    return "\n".join(
        [
            "# gnuplot script: decay of the lower component and of the frequency gap",
            "set datafile separator ','",
            "set key autotitle columnhead",
            "set logscale xy",
            "set xlabel 'c'",
            "set terminal pngcairo size 900,600",
            "set output 'sweep.png'",
            f"plot '{csv_name}' using 1:5 with linespoints title '|u2|_H1', \\",
            f"     '{csv_name}' using 1:4 with linespoints title '|u2|_2', \\",
            f"     '{csv_name}' using 1:6 with linespoints title '|u1 - g|_H1'",
            "",
        ]
    )


def manifest(report: SweepReport) -> dict:
    return {
        "status": "failed" if report.failed else "ok",
        "failure": report.failure,
        "config": report.config,
        "rows": len(report.rows),
        "expected_rows": len(report.config["c_list"]),
        "sign_convention": SIGN_CONVENTION,
        "lower_condition": report.lower,
        "nlse": {"lambda": report.lam, "energy": report.energy, **report.extra},
        "slope_h1_u2": report.slope,
        "tolerances": {"nlse": NLSE_TOL, "nlde": NLDE_TOL},
        "versions": {
            "diracgraph": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_clock_s": report.wall_clock,
    }


def emit_report(report: SweepReport, path: str | Path | None = None, plot: bool = True) -> Path:
    """Write ``sweep.csv``, ``manifest.json`` and (optionally) ``sweep.gp`` into ``path``."""
    out = Path(report.config["out_dir"] if path is None else path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(report.rows, out / CSV_NAME)
        (out / MANIFEST_NAME).write_text(json.dumps(manifest(report), indent=2, default=_json_default) + "\n")
        if plot:
            (out / PLOT_NAME).write_text(plot_script())
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return out


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(type(o).__name__)
