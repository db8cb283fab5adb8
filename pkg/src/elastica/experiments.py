"""Run configured experiments and write their artifacts.

Every run produces a JSON record, a CSV table of nodal data and SVG plots
in its output directory, next to an echo of the resolved configuration.
Records carry no timestamps or timings, so equal configs give equal bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adjoint import DesignParams, adjoint_solve
from .config import ExperimentConfig, config_dict
from .design import bfgs_optimize, hard_intervals, initial_phase_field
from .fem import FeFunction, SingularMatrixError, UniformGrid
from .homogenization import homogenization_experiment
from .materials import Homogeneous, PhaseFieldMaterial, RelaxedMaterial, chi
from .plots import PlotError, export_plot
from .state import BeamProblem, StateSolveError, curve_point, reconstruct_curve, shear, solve_branch
from .verification import (
    adjoint_boundary_report,
    compute_auxiliary,
    p_prime_sign_change,
    verify_kp_structure,
    verify_monotone_range,
    verify_Q_single_crossing,
    verify_shear_structure,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "K", "v", "theta", "k", "P", "p")
RECORD_NAME = "record.json"
CSV_NAME = "nodal.csv"
CONFIG_ECHO = "config.txt"
PLOT_FILES = {"curve": "curve.svg", "phase": "K.svg", "phase-field": "v.svg"}


@dataclass
class RunArtifact:
    record: dict
    directory: Path
    files: list[Path] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return int(self.record.get("exit_code", 1))


# -- record helpers -----------------------------------------------------------


def _clean(x):
    """JSON-safe copy: arrays to lists, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps_record(record: dict) -> str:
    return json.dumps(_clean(record), indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_record(record: dict, path) -> Path:
    path = Path(path)
    path.write_text(dumps_record(record))
    return path


def read_record(path) -> dict:
    return json.loads(Path(path).read_text())


def cells_to_nodes(c: np.ndarray) -> np.ndarray:
    """Average of the adjacent cell values; end nodes take their only cell."""
    c = np.asarray(c, dtype=float)
    out = np.empty(len(c) + 1)
    out[0], out[-1] = c[0], c[-1]
    out[1:-1] = 0.5 * (c[:-1] + c[1:])
    return out


def write_csv(record: dict, path) -> Path:
    nodal = record["nodal"]
    n = len(nodal["t"])
    cols = []
    for name in CSV_COLUMNS:
        col = nodal.get(name)
        cols.append([None] * n if col is None else col)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i in range(n):
            w.writerow(["nan" if c[i] is None else format(c[i], ".17g") for c in cols])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[j]) for r in body]) for j, name in enumerate(header)}


def _base_record(cfg: ExperimentConfig) -> dict:
    return {
        "command": cfg.command,
        "config": config_dict(cfg),
        "status": "ok",
        "exit_code": 0,
        "error": None,
        "violations": [],
        "scalars": {},
        "histories": {},
        "nodal": None,
        "cells": {},
        "curve": None,
    }


def _problem(cfg: ExperimentConfig, material=None) -> BeamProblem:
    return BeamProblem(cfg.delta, cfg.K0, cfg.a, cfg.b, material, tuple(cfg.constraints))


def _fill_state(record: dict, K: FeFunction, k, P: FeFunction | None, p, cfg: ExperimentConfig, v=None, theta=None):
    grid = K.grid
    nodal = {
        "t": grid.nodes,
        "K": K.coeffs,
        "v": None if v is None else v,
        "theta": None if theta is None else theta,
        "k": cells_to_nodes(k),
        "P": None if P is None else P.coeffs,
        "p": None if p is None else cells_to_nodes(p),
    }
    record["nodal"] = _clean(nodal)
    record["cells"] = _clean({"k": k, "p": p})
    record["curve"] = _clean(reconstruct_curve(K, cfg.K0).points)
    record["scalars"]["K_end"] = float(K.coeffs[-1])
    if cfg.constraints:
        dist = []
        for c in cfg.constraints:
            pt = curve_point(K, cfg.K0, c.time)
            dist.append({"time": c.time, "point": pt, "distance": float(np.hypot(*(pt - c.target)))})
        record["scalars"]["constraint_points"] = _clean(dist)


# -- pipelines -----------------------------------------------------------------


def _solve_state(cfg: ExperimentConfig, record: dict) -> None:
    problem = _problem(cfg, Homogeneous(cfg.homogeneous_stiffness))
    sol = solve_branch(problem, cfg.init, cfg.level_coarse, cfg.level_fine)
    adj = adjoint_solve(sol, problem)
    _fill_state(record, sol.K, sol.k, adj.P, adj.p, cfg)
    record["scalars"].update(
        energy=sol.energy,
        newton_iterations=sol.newton_iterations,
        residual_norm=sol.final_residual_norm,
        converged=sol.converged,
        level_iterations={str(k): v for k, v in sol.level_iterations.items()},
    )
    record["histories"]["energy"] = sol.energy_history


def _optimize(cfg: ExperimentConfig, record: dict):
    grid = UniformGrid(cfg.level_fine)
    rng = np.random.default_rng(cfg.seed)
    v0 = initial_phase_field(cfg.design_init, grid, rng)
    params = DesignParams(cfg.cl, cfg.cp, cfg.epsilon)
    problem = _problem(cfg)
    res = bfgs_optimize(v0, params, problem, max_iter=cfg.max_iter, state_init=cfg.init)
    ev = res.final
    v = res.v_final
    _fill_state(record, ev.state.K, ev.state.k, ev.adjoint.P, ev.adjoint.p, cfg, v.coeffs, np.minimum(1.0, chi(v.coeffs)))
    rep = res.optimality_report
    record["scalars"].update(
        cost=ev.cost,
        load=ev.parts.load,
        length=ev.parts.length,
        perimeter=ev.parts.perimeter,
        lam=params.lam(cfg.a, cfg.b),
        iterations=res.iterations,
        converged=res.converged,
        message=res.message,
        interfaces=res.interfaces,
        ordered=res.ordered,
        t_star=res.t_star,
        hard_intervals=[list(iv) for iv in hard_intervals(v, cfg.epsilon)],
        optimality_ok=rep.ok,
        optimality_max_violation=rep.max_violation,
        optimality_violations=len(rep.violations),
        v_min=float(v.coeffs.min()),
        v_max=float(v.coeffs.max()),
    )
    record["histories"].update(cost=res.cost_history, gradient_norm=res.gradient_norm_history)
    if not res.converged:
        record["violations"].append(f"design optimization did not converge: {res.message}")
    return res, problem, params


def _verify(cfg: ExperimentConfig, record: dict) -> None:
    res, problem, params = _optimize(cfg, record)
    ev = res.final
    K, P = ev.state.K, ev.adjoint.P
    k, p = ev.state.k, ev.adjoint.p
    design_prob = problem.with_material(PhaseFieldMaterial(res.v_final, cfg.a, cfg.b))
    reports = {}
    if cfg.K0 == 0.0:
        reports["monotone_range"] = verify_monotone_range(K)
        reports["adjoint_boundary"] = adjoint_boundary_report(p, P, cfg.delta)
    else:
        record.setdefault("notes", []).append("monotone range and adjoint boundary checks need K0 = 0; skipped")
    reports["shear"] = verify_shear_structure(k)
    try:
        reports["Q_crossing"] = verify_Q_single_crossing(compute_auxiliary(K, P, design_prob))
    except ValueError as exc:
        record["violations"].append(f"Q_crossing: {exc}")
    reports["kp"] = verify_kp_structure(k, p)
    record["verification"] = {name: rep.to_dict() for name, rep in reports.items()}
    for name, rep in reports.items():
        for t, m in rep.violations:
            record["violations"].append(f"{name}: violation of size {m:.3e} at t = {t:.6f}")
    t2 = reports["kp"].times["t2"]
    record["scalars"]["t2"] = t2
    record["scalars"]["p_prime_sign_change"] = p_prime_sign_change(p)
    if "Q_crossing" in reports:
        record["scalars"]["t0"] = reports["Q_crossing"].times["t0"]
    if not res.ordered:
        record["violations"].append(f"design is not ordered (interfaces {res.interfaces})")
    elif not res.t_star < t2:
        record["violations"].append(f"t* = {res.t_star:.6f} is not below t2 = {t2:.6f}")
    if not res.optimality_report.ok:
        record["violations"].append(
            f"optimality condition violated in {len(res.optimality_report.violations)} cells "
            f"(max {res.optimality_report.max_violation:.3e})"
        )


def _homogenize(cfg: ExperimentConfig, record: dict) -> None:
    grid = UniformGrid(cfg.level_coarse)
    theta = FeFunction(grid, np.full(grid.num_nodes, cfg.theta))
    problem = _problem(cfg)
    table = homogenization_experiment(
        theta, cfg.periods, problem, level=cfg.level_fine, coarse_level=cfg.level_coarse, placement=cfg.placement
    )
    K = table.K_homogenized
    fine_theta = np.full(K.grid.num_nodes, cfg.theta)
    relaxed = problem.with_material(RelaxedMaterial(theta, cfg.a, cfg.b))
    adj = adjoint_solve(K, relaxed)
    _fill_state(record, K, shear(K, relaxed), adj.P, adj.p, cfg, theta=fine_theta)
    record["scalars"]["rows"] = _clean([dataclasses.asdict(r) for r in table.rows])
    record["scalars"]["decreasing"] = table.decreasing
    record["scalars"]["level"] = table.level
    for r in table.rows:
        if r.error_message:
            record["violations"].append(f"laminate n={r.n}: {r.error_message}")
    if not table.decreasing:
        record["violations"].append(f"laminate errors not strictly decreasing: {table.errors}")


_PIPELINES = {
    "solve-state": _solve_state,
    "optimize-design": _optimize,
    "verify": _verify,
    "homogenize": _homogenize,
}


def _sweep_worker(cfg: ExperimentConfig) -> dict:
    art = run_experiment(cfg)
    return {
        "directory": str(art.directory),
        "exit_code": art.exit_code,
        "status": art.record["status"],
        "scalars": art.record["scalars"],
    }


def _sweep(cfg: ExperimentConfig, record: dict) -> None:
    name = cfg.sweep_param.replace("-", "_")
    kind = type(getattr(ExperimentConfig(), name, 0.0))
    configs = []
    for value in cfg.sweep_values:
        val = int(value) if kind is int else float(value)
        sub = dataclasses.replace(
            cfg,
            command=cfg.base_command,
            out=str(Path(cfg.out) / f"{cfg.sweep_param}={val!r}"),
            **{name: val},
        )
        configs.append(sub)
    if cfg.workers == 1:
        results = [_sweep_worker(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_sweep_worker, configs))
    record["runs"] = [{"value": v, **r} for v, r in zip(cfg.sweep_values, results)]
    for v, r in zip(cfg.sweep_values, results):
        if r["exit_code"] != 0:
            record["violations"].append(f"run {cfg.sweep_param}={v!r} failed ({r['status']})")


def run_experiment(cfg: ExperimentConfig, plots: bool = True) -> RunArtifact:
    """Run ``cfg.command`` and write its artifacts into ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = [out / CONFIG_ECHO]
    files[0].write_text(cfg.to_text())
    record = _base_record(cfg)
    try:
        if cfg.command == "sweep":
            _sweep(cfg, record)
        else:
            _PIPELINES[cfg.command](cfg, record)
    except (StateSolveError, SingularMatrixError, ArithmeticError, ValueError, RuntimeError) as exc:
        log.error("%s failed: %s", cfg.command, exc)
        record["status"] = "error"
        record["error"] = f"{type(exc).__name__}: {exc}"
        record["violations"].append(record["error"])
    if record["status"] == "ok" and record["violations"]:
        record["status"] = "failed"
    record["exit_code"] = 0 if record["status"] == "ok" else 1
    files.append(write_record(record, out / RECORD_NAME))
    if record["nodal"] is not None:
        files.append(write_csv(record, out / CSV_NAME))
        if plots:
            for kind, fname in PLOT_FILES.items():
                try:
                    files.append(export_plot(record, kind, out / fname))
                except PlotError as exc:
                    log.info("skipping %s plot: %s", kind, exc)
    return RunArtifact(record, out, files)
