import pytest

import hjlab


@pytest.fixture(scope="session")
def grid2_64():
    return hjlab.GridSpec(2, 64)


@pytest.fixture(scope="session")
def ws2_64(grid2_64):
    return hjlab.SpectrumWorkspace(grid2_64)


@pytest.fixture(scope="session")
def manufactured_g2_d2(grid2_64, ws2_64):
    """Solved manufactured instance: d=2, gamma=2, n=64 (shared, heavy)."""
    prob, u_star = hjlab.manufactured_problem(grid2_64, hjlab.Hamiltonian(gamma=2.0), 4.0, ws2_64)
    sol = hjlab.solve(prob, hjlab.SolveSettings(), ws2_64)
    assert sol.converged
    return sol, prob, u_star


def band_limited(grid, seed, amplitude=1.0, band=4):
    """Random smooth field for property tests (not norm-calibrated)."""
    f = hjlab.generate_source(seed, band, 1.0, 2.0, grid)
    return hjlab.ScalarField(grid, amplitude * f.values)
