"""Command-line front end.

Subcommands: params, solve, sweep, counterexample, audit, curve.
Global flags: --config PATH, --out DIR, --threads N, --quiet (HJLAB_THREADS
is the fallback for --threads).

Exit codes: 0 success; 1 audit checks failed; 2 domain/admissibility or
configuration error; 3 solver divergence or non-convergence; 4 I/O or
file-format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .bernstein import derive_exponents
from .config import RunConfig, load_config
from .errors import (
    AdmissibilityError,
    ConfigError,
    DivergenceError,
    DomainError,
    FieldIOError,
    HJLabError,
    NewtonStagnationError,
)
from .runner import run_audit, run_counterexample, run_curve, run_solve, run_sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hjlab",
        description="Pseudospectral laboratory for maximal Lq-regularity experiments "
        "on the periodic viscous Hamilton-Jacobi equation.",
    )
    parser.add_argument("--version", action="version", version=f"hjlab {__version__}")
    parser.add_argument("--config", metavar="PATH", help="JSON run configuration")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        metavar="N",
        help="worker processes for sweeps (default: HJLAB_THREADS or 1)",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="derive the exponent bundle for (gamma, q, dim)")
    p.add_argument("gamma", type=float)
    p.add_argument("q", type=float)
    p.add_argument("dim", type=int)
    p.add_argument("delta", type=float, nargs="?", default=None)

    sub.add_parser("solve", help="solve one configured instance")
    sub.add_parser("sweep", help="run a seeded ensemble of solves")

    p = sub.add_parser("counterexample", help="critical-exponent radial norm sweep")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--q", type=float, default=None, help="default: the critical exponent")
    p.add_argument(
        "--eps",
        default="0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125",
        help="comma-separated eps values in (0, 1/4]",
    )

    p = sub.add_parser("audit", help="re-verify a stored solution directory")
    p.add_argument("solution_dir")

    p = sub.add_parser("curve", help="re-emit Y_k for a stored solution")
    p.add_argument("solution_dir")
    p.add_argument("--k-min", type=float, default=1.0)
    p.add_argument("--k-max-factor", type=float, default=1.05)
    p.add_argument("--count", type=int, default=64)

    return parser


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("HJLAB_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"HJLAB_THREADS is not an integer: {env!r}") from exc
    return 1


def _load_run_config(args) -> RunConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = RunConfig()
    return config


def _resolve_out(args, config: RunConfig) -> str:
    out = args.out or config.output_dir
    if not out:
        raise ConfigError("no output directory: pass --out or set output_dir in the config")
    return out


def _cmd_params(args) -> int:
    exps = derive_exponents(args.gamma, args.q, args.dim, delta=args.delta)
    json.dump(exps.to_dict(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _cmd_solve(args) -> int:
    config = _load_run_config(args)
    out = _resolve_out(args, config)
    manifest = run_solve(config, out, quiet=args.quiet)
    if not args.quiet:
        entry = manifest["runs"][0]
        print(
            f"solve: converged={entry['converged']} lambda={entry['lambda']:.6g} "
            f"residual_inf={entry['residual_inf']:.3e} -> {out}"
        )
    return 0 if manifest["all_converged"] else 3


def _cmd_sweep(args) -> int:
    config = _load_run_config(args)
    out = _resolve_out(args, config)
    manifest = run_sweep(config, out, threads=_threads(args), quiet=args.quiet)
    if not args.quiet:
        print(
            f"sweep: {len(manifest['runs'])} runs, all_converged={manifest['all_converged']}, "
            f"K_emp={manifest['K_emp']:.6g} -> {out}"
        )
    return 0 if manifest["all_converged"] else 3


def _cmd_counterexample(args) -> int:
    out = args.out or "."
    eps_list = [float(tok) for tok in args.eps.split(",") if tok.strip()]
    path = os.path.join(out, "norms.csv")
    result = run_counterexample(args.gamma, args.dim, args.q, eps_list, path)
    if not args.quiet:
        fit = result["fit"]
        msg = f"counterexample: {result['rows']} rows at q={result['q']:.6g}"
        if fit is not None:
            msg += f", slope={fit['slope']:.6g}, fit_residual={fit['max_rel_residual']:.3g}"
        print(msg + f" -> {result['path']}")
    return 0


def _cmd_audit(args) -> int:
    doc = run_audit(args.solution_dir)
    if not args.quiet:
        for name, check in doc["checks"].items():
            print(f"audit {name}: {'pass' if check['passed'] else 'FAIL'}")
    return 0 if doc["passed"] else 1


def _cmd_curve(args) -> int:
    out_path = None
    if args.out:
        out_path = os.path.join(args.out, "curve.csv")
    path = run_curve(
        args.solution_dir,
        k_min=args.k_min,
        k_max_factor=args.k_max_factor,
        count=args.count,
        out_path=out_path,
    )
    if not args.quiet:
        print(f"curve -> {path}")
    return 0


_DISPATCH = {
    "params": _cmd_params,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "counterexample": _cmd_counterexample,
    "audit": _cmd_audit,
    "curve": _cmd_curve,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (AdmissibilityError, DomainError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, NewtonStagnationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except FieldIOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except HJLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
