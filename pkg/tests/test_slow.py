"""Long-running resolution studies; excluded from the default run.

Run with `pytest -m slow`.
"""

import numpy as np
import pytest

import hjlab

pytestmark = pytest.mark.slow


def test_d3_norm_stability_under_refinement():
    # the d=3 analog of the d=2 stability gate, at the largest grids that
    # stay tractable on one desk core (n = 32 -> 64)
    H = hjlab.Hamiltonian(gamma=2.0)
    exps = hjlab.derive_exponents(2.0, 4.0, 3)
    vals = {}
    for n in (32, 64):
        grid = hjlab.GridSpec(3, n)
        ws = hjlab.SpectrumWorkspace(grid)
        f = hjlab.generate_source(42, 4, 2.0, 4.0, grid)
        prob = hjlab.ErgodicProblem(f=f, H=H, q=4.0)
        sol = hjlab.solve(prob, hjlab.SolveSettings(), ws)
        assert sol.converged
        rep = hjlab.regularity_report(sol, prob, exps, ws)
        vals[n] = (rep.norm_lap_q, rep.norm_gradpow_q)
    for a, b in zip(vals[32], vals[64]):
        assert abs(a - b) / max(a, 1e-300) < 0.01


def test_d3_ensemble_envelope_decays():
    # small 3D ensemble exercising the (d-2)/d excess exponent end to end
    grid = hjlab.GridSpec(3, 32)
    ws = hjlab.SpectrumWorkspace(grid)
    H = hjlab.Hamiltonian(gamma=3.0)
    exps = hjlab.derive_exponents(3.0, 4.0, 3)
    curves = []
    for i in range(5):
        f = hjlab.generate_source(700 + i, 4, 5.0, 4.0, grid)
        prob = hjlab.ErgodicProblem(f=f, H=H, q=4.0)
        sol = hjlab.solve(prob, hjlab.SolveSettings(), ws)
        assert sol.converged
        curves.append(
            hjlab.superlevel_curve(sol, exps, hjlab.default_k_grid(sol, exps, ws=ws), ws)
        )
    env = hjlab.omega_envelope(curves)
    assert np.all(np.diff(env.e) >= 0)
    assert env.at(0.01) <= env.at(0.5) / 10.0
