"""Experiment orchestration: solve/sweep/audit runs, persistence, manifests.

A solution directory holds u.field and f.field (binary field format),
solution.json (scalars and settings), report.json (norm bundle and
exponents), and curve.csv (superlevel functional).  Sweeps add per-run
subdirectories plus aggregate.csv and envelope.csv.  The manifest is
written last, atomically via rename, and only references files that
exist; CSV numbers carry 17 significant digits so they round-trip.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .backend import COMPILED
from .bernstein import (
    Exponents,
    SuperlevelCurve,
    derive_exponents,
    g_eval,
    ibp_identity_residual,
    nominal_exponents,
    omega_envelope,
    pointwise_audit,
    regularity_report,
    superlevel_curve,
)
from .config import RunConfig
from .counterexample import (
    RadialProfile,
    build_norm_table,
    critical_q,
    divergence_fit,
    radial_residual,
)
from .ensemble import generate_source, manufactured_problem
from .errors import AdmissibilityError, DivergenceError, FieldIOError
from .fieldio import read_field, write_field
from .solver import (
    ErgodicProblem,
    ErgodicSolution,
    Hamiltonian,
    hopf_cole_residual,
    integral_identity_check,
    solve,
)
from .torus import GridSpec, SpectrumWorkspace, gradient

IBP_GAP_TOL = 1e-5
HOPF_COLE_TOL = 1e-7
_QUANTILES = (0.1, 0.3, 0.5, 0.7, 0.9)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.floating, np.integer)):
        return _json_safe(obj.item())
    return obj


def write_json_atomic(path, doc) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(_json_safe(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def write_curve_csv(path, curve: SuperlevelCurve) -> None:
    ex = curve.excess()
    with open(path, "w") as fh:
        fh.write("k,Y_k,omega_arg,excess\n")
        for i in range(curve.k_grid.size):
            fh.write(
                f"{_fmt(curve.k_grid[i])},{_fmt(curve.Y[i])},"
                f"{_fmt(curve.omega_arg[i])},{_fmt(ex[i])}\n"
            )


def _exponents_for(config: RunConfig):
    """(exponents, warnings): derived when admissible, nominal otherwise."""
    warnings = []
    explicit = None if config.delta == "auto" else float(config.delta)
    try:
        exps = derive_exponents(config.gamma, config.q, config.dimension, delta=explicit)
    except AdmissibilityError as exc:
        delta = explicit if explicit is not None else 0.05
        exps = nominal_exponents(config.gamma, config.q, config.dimension, delta)
        warnings.append(
            f"inadmissible (gamma, q, d): {exc}; proceeding with nominal delta = {delta}"
        )
    return exps, warnings


def exponents_from_dict(doc: dict) -> Exponents:
    """Rehydrate exponents written by a report; None fields mean nominal mode."""
    if doc.get("p") is None:
        return nominal_exponents(doc["gamma"], doc["q"], doc["d"], doc["delta"])
    return Exponents(
        gamma=doc["gamma"],
        q=doc["q"],
        d=doc["d"],
        delta=doc["delta"],
        delta_max=doc["delta_max"],
        p=doc["p"],
        beta=doc["beta"],
        eta=doc["eta"],
        used_fallback=doc["used_fallback"],
    )


def _problem_from_config(config: RunConfig, seed: int, grid: GridSpec, ws):
    H = Hamiltonian(gamma=config.gamma)
    if config.manufactured:
        prob, u_star = manufactured_problem(grid, H, config.q, ws)
        return prob, u_star
    f = generate_source(seed, config.band_limit, config.M_target, config.q, grid)
    return ErgodicProblem(f=f, H=H, q=config.q), None


def _k_grid_from_config(config: RunConfig, sol, exps, ws):
    from .bernstein import default_k_grid

    return default_k_grid(
        sol,
        exps,
        count=config.k_grid.count,
        k_min=config.k_grid.k_min,
        k_max_factor=config.k_grid.k_max_factor,
        ws=ws,
    )


def solve_one(config: RunConfig, seed: int, out_dir: Path, quiet: bool = True):
    """Solve one instance, persist the solution directory, return its manifest entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = GridSpec(config.dimension, config.grid_n)
    ws = SpectrumWorkspace(grid)
    exps, warnings = _exponents_for(config)
    prob, u_star = _problem_from_config(config, seed, grid, ws)

    t0 = time.perf_counter()
    try:
        sol = solve(prob, config.solver, ws)
    except DivergenceError as exc:
        entry = {
            "status": "diverged",
            "seed": seed,
            "error": str(exc),
            "step": exc.step,
            "warnings": warnings,
        }
        write_json_atomic(out_dir / "manifest.json", _manifest_shell(config, [entry], []))
        raise
    wall = time.perf_counter() - t0

    report = regularity_report(sol, prob, exps, ws)
    curve = superlevel_curve(sol, exps, _k_grid_from_config(config, sol, exps, ws), ws)

    write_field(out_dir / "u.field", sol.u)
    write_field(out_dir / "f.field", prob.f)
    solution_doc = {
        "gamma": config.gamma,
        "c1": 1.0,
        "q": config.q,
        "lambda": sol.lam,
        "residual_inf": sol.residual_inf,
        "residual_l2": sol.residual_l2,
        "steps": {"relax": sol.relax_steps, "newton": sol.newton_steps},
        "converged": sol.converged,
        "settings": config.solver.to_dict(),
        "grid": {"d": grid.d, "n": grid.n},
    }
    write_json_atomic(out_dir / "solution.json", solution_doc)
    report_doc = report.to_dict()
    report_doc["seed"] = seed
    report_doc["admissibility"] = prob.admissibility()
    if u_star is not None:
        recovery = float(np.abs(sol.u.values - u_star.values).max())
        report_doc["recovery_error"] = recovery
    write_json_atomic(out_dir / "report.json", report_doc)
    write_curve_csv(out_dir / "curve.csv", curve)

    entry = {
        "status": "ok",
        "seed": seed,
        "converged": sol.converged,
        "lambda": sol.lam,
        "residual_inf": sol.residual_inf,
        "wall_seconds": wall,
        "warnings": warnings,
        "files": {
            "u": "u.field",
            "f": "f.field",
            "solution": "solution.json",
            "report": "report.json",
            "curve": "curve.csv",
        },
        "report": {k: report_doc[k] for k in ("norm_lap_q", "norm_gradpow_q", "M_emp", "K_emp")},
    }
    if "recovery_error" in report_doc:
        entry["report"]["recovery_error"] = report_doc["recovery_error"]
    return entry, sol, prob, report, curve


def _manifest_shell(config: RunConfig, runs, files, extra=None) -> dict:
    doc = {
        "tool": f"hjlab {__version__}",
        "kernel_backend": "compiled" if COMPILED else "numpy",
        "rng": "numpy PCG64",
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "runs": runs,
        "files": files,
    }
    if extra:
        doc.update(extra)
    return doc


def run_solve(config: RunConfig, out_dir, quiet: bool = False) -> dict:
    """CLI `solve`: one instance in `out_dir`; manifest written last."""
    out_dir = Path(out_dir)
    entry, sol, prob, report, curve = solve_one(config, config.seed, out_dir, quiet)
    manifest = _manifest_shell(
        config,
        [entry],
        sorted(entry["files"].values()) + ["manifest.json"],
        extra={"all_converged": bool(sol.converged)},
    )
    write_json_atomic(out_dir / "manifest.json", manifest)
    return manifest


def _sweep_worker(args):
    config, index, run_dir = args
    seed = config.seed + index
    try:
        entry, sol, prob, report, curve = solve_one(config, seed, Path(run_dir))
    except DivergenceError as exc:
        nan = float("nan")
        return (
            {"status": "diverged", "seed": seed, "error": str(exc)},
            {
                "run_index": index,
                "seed": seed,
                "lambda": nan,
                "norm_f_eff": nan,
                "norm_du_l1": nan,
                "M_emp": nan,
                "norm_lap_q": nan,
                "norm_gradpow_q": nan,
                "K_emp_run": nan,
                "converged": False,
            },
            None,
        )
    row = {
        "run_index": index,
        "seed": seed,
        "lambda": sol.lam,
        "norm_f_eff": report.norm_f_eff_q,
        "norm_du_l1": report.norm_du_l1,
        "M_emp": report.m_emp,
        "norm_lap_q": report.norm_lap_q,
        "norm_gradpow_q": report.norm_gradpow_q,
        "K_emp_run": report.k_emp,
        "converged": sol.converged,
    }
    curve_payload = (curve.k_grid, curve.Y, curve.omega_arg, curve.exponents.to_dict())
    return entry, row, curve_payload


def run_sweep(config: RunConfig, out_dir, threads: int = 1, quiet: bool = False) -> dict:
    """CLI `sweep`: ensemble of independent solves with seeds seed + i."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (config, i, str(out_dir / f"run_{i:03d}")) for i in range(config.ensemble_size)
    ]
    results = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for res in pool.map(_sweep_worker, tasks):
                results.append(res)
    else:
        for task in tasks:
            if not quiet:
                print(f"[sweep] run {task[1] + 1}/{config.ensemble_size}", flush=True)
            results.append(_sweep_worker(task))

    rows = sorted((r[1] for r in results), key=lambda r: r["run_index"])
    agg_path = out_dir / "aggregate.csv"
    cols = [
        "run_index",
        "seed",
        "lambda",
        "norm_f_eff",
        "norm_du_l1",
        "M_emp",
        "norm_lap_q",
        "norm_gradpow_q",
        "K_emp_run",
        "converged",
    ]
    with open(agg_path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            cells = []
            for col in cols:
                val = row[col]
                if isinstance(val, bool):
                    cells.append("1" if val else "0")
                elif isinstance(val, int):
                    cells.append(str(val))
                else:
                    cells.append(_fmt(val))
            fh.write(",".join(cells) + "\n")

    curves = []
    for entry, row, payload in results:
        if payload is not None and row["converged"]:
            k, y, om, expd = payload
            curves.append(
                SuperlevelCurve(
                    k_grid=np.asarray(k),
                    Y=np.asarray(y),
                    omega_arg=np.asarray(om),
                    exponents=exponents_from_dict(expd),
                )
            )
    env_path = out_dir / "envelope.csv"
    if curves:
        env = omega_envelope(curves)
        with open(env_path, "w") as fh:
            fh.write("t,excess\n")
            for t, e in zip(env.t, env.e):
                fh.write(f"{_fmt(t)},{_fmt(e)}\n")
    else:
        with open(env_path, "w") as fh:
            fh.write("t,excess\n")

    entries = [r[0] for r in results]
    all_converged = all(
        e.get("status") == "ok" and e.get("converged", False) for e in entries
    )
    k_emp = max((r["K_emp_run"] for r in rows if math.isfinite(r["K_emp_run"])), default=float("nan"))
    manifest = _manifest_shell(
        config,
        entries,
        ["aggregate.csv", "envelope.csv", "manifest.json"],
        extra={"all_converged": all_converged, "K_emp": k_emp},
    )
    write_json_atomic(out_dir / "manifest.json", manifest)
    return manifest


def load_solution_dir(solution_dir):
    """Read back (solution, problem, exponents, solution_doc) from a directory."""
    solution_dir = Path(solution_dir)
    for name in ("u.field", "f.field", "solution.json", "report.json"):
        if not (solution_dir / name).exists():
            raise FieldIOError(f"solution directory is missing {name}")
    u = read_field(solution_dir / "u.field")
    f = read_field(solution_dir / "f.field")
    try:
        with open(solution_dir / "solution.json") as fh:
            sdoc = json.load(fh)
        with open(solution_dir / "report.json") as fh:
            rdoc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FieldIOError(f"cannot read solution metadata: {exc}") from exc
    H = Hamiltonian(gamma=sdoc["gamma"], c1=sdoc.get("c1", 1.0))
    prob = ErgodicProblem(f=f, H=H, q=sdoc["q"])
    sol = ErgodicSolution(
        u=u,
        lam=sdoc["lambda"],
        residual_inf=sdoc["residual_inf"],
        residual_l2=sdoc["residual_l2"],
        relax_steps=sdoc["steps"]["relax"],
        newton_steps=sdoc["steps"]["newton"],
        converged=sdoc["converged"],
    )
    exps = exponents_from_dict(rdoc["exponents"]) if rdoc.get("exponents") else None
    return sol, prob, exps, sdoc


def quantile_k_values(sol, exps, ws, quantiles=_QUANTILES):
    """Superlevel thresholds at quantiles of w = g(|Du|^2), clipped to k >= 1."""
    s = gradient(sol.u, ws).norm_sq_values()
    w, _, _ = g_eval(s, float(exps.delta))
    return [max(1.0, float(np.quantile(w, p))) for p in quantiles]


def run_audit(solution_dir) -> dict:
    """CLI `audit`: every stored-solution check with documented tolerances."""
    sol, prob, exps, sdoc = load_solution_dir(solution_dir)
    ws = SpectrumWorkspace(sol.u.grid)
    if exps is None:
        raise FieldIOError("report.json carries no exponents; cannot audit")
    newton_tol = sdoc["settings"]["newton_tol"]

    checks = {}
    audit = pointwise_audit(sol.u, exps, ws)
    checks["pointwise"] = {"passed": audit.passed, "inequalities": audit.to_dict()}

    ibp_entries = []
    ibp_pass = True
    for k in quantile_k_values(sol, exps, ws):
        res = ibp_identity_residual(sol, prob, exps, k, ws)
        ok = res.gap <= IBP_GAP_TOL
        ibp_pass = ibp_pass and ok
        ibp_entries.append(
            {"k": k, "lhs": res.lhs, "rhs": res.rhs, "gap": res.gap, "passed": ok}
        )
    checks["ibp_identity"] = {
        "passed": ibp_pass,
        "tolerance": IBP_GAP_TOL,
        "levels": ibp_entries,
    }

    drift = integral_identity_check(sol, prob, ws)
    checks["integral_identity"] = {
        "value": drift,
        "tolerance": 10.0 * newton_tol,
        "passed": drift <= 10.0 * newton_tol,
    }

    if prob.H.gamma == 2 and prob.H.c1 == 1 and prob.H.pure_power:
        hopf = hopf_cole_residual(sol, prob, ws)
        checks["hopf_cole"] = {
            "value": hopf,
            "tolerance": HOPF_COLE_TOL,
            "passed": hopf <= HOPF_COLE_TOL,
        }

    passed = all(c["passed"] for c in checks.values())
    doc = {"passed": passed, "converged": sol.converged, "checks": checks}
    write_json_atomic(Path(solution_dir) / "audit.json", doc)
    return doc


def run_curve(solution_dir, k_min=1.0, k_max_factor=1.05, count=64, out_path=None) -> Path:
    """CLI `curve`: re-emit Y_k for a stored solution on a custom k-grid."""
    from .bernstein import default_k_grid

    sol, prob, exps, _ = load_solution_dir(solution_dir)
    if exps is None:
        raise FieldIOError("report.json carries no exponents; cannot build a curve")
    ws = SpectrumWorkspace(sol.u.grid)
    kg = default_k_grid(
        sol, exps, count=count, k_min=k_min, k_max_factor=k_max_factor, ws=ws
    )
    curve = superlevel_curve(sol, exps, kg, ws)
    out_path = Path(out_path) if out_path else Path(solution_dir) / "curve.csv"
    write_curve_csv(out_path, curve)
    return out_path


def run_counterexample(
    gamma: float,
    d: int,
    q: float | None,
    eps_list,
    out_path,
    rel_tol: float = 1e-9,
    residual_samples: int = 400,
) -> dict:
    """CLI `counterexample`: norm table CSV with the divergence fit appended."""
    if q is None:
        q = critical_q(gamma, d)
    table = build_norm_table(gamma, d, q, eps_list, rel_tol=rel_tol)

    worst = 0.0
    for row in table.rows:
        prof = RadialProfile(gamma=gamma, d=d, eps=row.eps)
        radii = np.geomspace(row.eps / 4, 0.499, residual_samples)
        worst = max(worst, radial_residual(prof, radii))

    fit = divergence_fit(table) if len(table.rows) >= 4 else None
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        fh.write("eps,q,norm_f,norm_grad_pow,quad_tol\n")
        for row in table.rows:
            fh.write(
                f"{_fmt(row.eps)},{_fmt(row.q)},{_fmt(row.norm_f)},"
                f"{_fmt(row.norm_grad_pow)},{_fmt(table.quad_tol)}\n"
            )
        if fit is not None:
            fh.write(f"# slope={_fmt(fit.slope)}\n")
            fh.write(f"# intercept={_fmt(fit.intercept)}\n")
            fh.write(f"# fit_residual={_fmt(fit.max_rel_residual)}\n")
        fh.write(f"# max_radial_residual={_fmt(worst)}\n")
    return {
        "rows": len(table.rows),
        "q": q,
        "fit": None if fit is None else vars(fit),
        "max_radial_residual": worst,
        "path": str(out_path),
    }
