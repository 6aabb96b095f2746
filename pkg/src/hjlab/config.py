"""Run configuration: strict JSON schema, defaults, canonical hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .solver import SolveSettings

_K_GRID_KEYS = {"k_min", "k_max_factor", "count"}
_SOLVER_KEYS = {
    "relax_dt",
    "relax_tol",
    "newton_tol",
    "linear_tol",
    "max_relax_steps",
    "max_newton_steps",
}
_TOP_KEYS = {
    "dimension",
    "grid_n",
    "gamma",
    "q",
    "delta",
    "M_target",
    "ensemble_size",
    "seed",
    "band_limit",
    "solver",
    "k_grid",
    "output_dir",
    "manufactured",
}


@dataclass(frozen=True)
class KGridSpec:
    k_min: float = 1.0
    k_max_factor: float = 1.05
    count: int = 64


@dataclass(frozen=True)
class RunConfig:
    dimension: int = 2
    grid_n: int = 64
    gamma: float = 2.0
    q: float = 4.0
    delta: float | str = "auto"
    M_target: float = 1.0
    ensemble_size: int = 1
    seed: int = 0
    band_limit: int = 8
    solver: SolveSettings = field(default_factory=SolveSettings)
    k_grid: KGridSpec = field(default_factory=KGridSpec)
    output_dir: str | None = None
    manufactured: bool = False

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "grid_n": self.grid_n,
            "gamma": self.gamma,
            "q": self.q,
            "delta": self.delta,
            "M_target": self.M_target,
            "ensemble_size": self.ensemble_size,
            "seed": self.seed,
            "band_limit": self.band_limit,
            "solver": self.solver.to_dict(),
            "k_grid": {
                "k_min": self.k_grid.k_min,
                "k_max_factor": self.k_grid.k_max_factor,
                "count": self.k_grid.count,
            },
            "output_dir": self.output_dir,
            "manufactured": self.manufactured,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _as_int(doc, key, lo=None, hi=None):
    val = doc[key]
    _expect(isinstance(val, int) and not isinstance(val, bool), f"{key} must be an integer")
    if lo is not None:
        _expect(val >= lo, f"{key} must be >= {lo}, got {val}")
    if hi is not None:
        _expect(val <= hi, f"{key} must be <= {hi}, got {val}")
    return val


def _as_real(doc, key, lo=None, strict_lo=None):
    val = doc[key]
    _expect(
        isinstance(val, (int, float)) and not isinstance(val, bool),
        f"{key} must be a number",
    )
    val = float(val)
    if lo is not None:
        _expect(val >= lo, f"{key} must be >= {lo}, got {val}")
    if strict_lo is not None:
        _expect(val > strict_lo, f"{key} must be > {strict_lo}, got {val}")
    return val


def config_from_dict(doc: dict) -> RunConfig:
    """Validate a JSON document into a RunConfig; unknown keys are rejected."""
    _expect(isinstance(doc, dict), "config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    _expect(not unknown, f"unknown config keys: {sorted(unknown)}")
    merged = RunConfig().to_dict()
    merged.update(doc)

    dimension = _as_int(merged, "dimension", lo=1, hi=3)
    grid_n = _as_int(merged, "grid_n", lo=8)
    _expect(grid_n & (grid_n - 1) == 0, f"grid_n must be a power of two, got {grid_n}")
    gamma = _as_real(merged, "gamma", strict_lo=1.0)
    q = _as_real(merged, "q", lo=1.0)
    delta = merged["delta"]
    if delta != "auto":
        _expect(
            isinstance(delta, (int, float)) and not isinstance(delta, bool),
            'delta must be a number or "auto"',
        )
        delta = float(delta)
        _expect(0 < delta < 1, f"delta must lie in (0, 1), got {delta}")
    m_target = _as_real(merged, "M_target", lo=0.0)
    ensemble_size = _as_int(merged, "ensemble_size", lo=1)
    seed = _as_int(merged, "seed", lo=0)
    _expect(seed < 2**64, "seed must fit in 64 bits")
    band_limit = _as_int(merged, "band_limit", lo=1)
    _expect(
        band_limit < grid_n // 4,
        f"band_limit must be < grid_n/4 = {grid_n // 4} (resolved band), got {band_limit}",
    )
    manufactured = merged["manufactured"]
    _expect(isinstance(manufactured, bool), "manufactured must be a boolean")
    output_dir = merged["output_dir"]
    _expect(
        output_dir is None or isinstance(output_dir, str),
        "output_dir must be a string path",
    )

    solver_doc = merged["solver"]
    if isinstance(solver_doc, SolveSettings):
        solver = solver_doc
    else:
        _expect(isinstance(solver_doc, dict), "solver must be an object")
        unknown = set(solver_doc) - _SOLVER_KEYS
        _expect(not unknown, f"unknown solver keys: {sorted(unknown)}")
        try:
            solver = SolveSettings(**solver_doc)
        except TypeError as exc:
            raise ConfigError(f"invalid solver settings: {exc}") from exc

    kg_doc = merged["k_grid"]
    if isinstance(kg_doc, KGridSpec):
        kg = kg_doc
    else:
        _expect(isinstance(kg_doc, dict), "k_grid must be an object")
        unknown = set(kg_doc) - _K_GRID_KEYS
        _expect(not unknown, f"unknown k_grid keys: {sorted(unknown)}")
        merged_kg = {"k_min": 1.0, "k_max_factor": 1.05, "count": 64}
        merged_kg.update(kg_doc)
        _expect(
            isinstance(merged_kg["count"], int) and merged_kg["count"] >= 2,
            "k_grid.count must be an integer >= 2",
        )
        k_min = float(merged_kg["k_min"])
        _expect(k_min >= 1.0, f"k_grid.k_min must be >= 1, got {k_min}")
        k_max_factor = float(merged_kg["k_max_factor"])
        _expect(k_max_factor > 0, "k_grid.k_max_factor must be positive")
        kg = KGridSpec(k_min=k_min, k_max_factor=k_max_factor, count=merged_kg["count"])

    return RunConfig(
        dimension=dimension,
        grid_n=grid_n,
        gamma=gamma,
        q=q,
        delta=delta,
        M_target=m_target,
        ensemble_size=ensemble_size,
        seed=seed,
        band_limit=band_limit,
        solver=solver,
        k_grid=kg,
        output_dir=output_dir,
        manufactured=manufactured,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)
