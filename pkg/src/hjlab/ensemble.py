"""Seeded random sources and manufactured problems for solver experiments."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .solver import ErgodicProblem, Hamiltonian, _Operator
from .torus import GridSpec, ScalarField, SpectrumWorkspace, lq_norm


def _canonical_band_modes(d: int, band: int):
    """Half of the (non-zero) band lattice: first non-zero component > 0.

    Lexicographic order, independent of the grid resolution, so one seed
    defines the same trigonometric polynomial on every grid that resolves
    the band (which is what resolution studies need).
    """
    from itertools import product

    out = []
    for m in product(range(-band, band + 1), repeat=d):
        for comp in m:
            if comp > 0:
                out.append(m)
                break
            if comp < 0:
                break
    return out


def generate_source(
    seed: int, band_limit: int, m_target: float, q: float, grid: GridSpec
) -> ScalarField:
    """Random band-limited field with ||f||_q = m_target.

    One independent standard-normal complex coefficient per mode of the
    band max_j |m_j| <= band_limit (zero mode removed), drawn in canonical
    lattice order from the seeded generator (PCG64) and Hermitian
    symmetrized, so the field is real and -- at fixed seed and band --
    the same trigonometric polynomial on every resolving grid.  The final
    multiplicative rescaling hits the norm target to roundoff.
    """
    if band_limit < 1:
        raise ConfigError(f"band_limit must be >= 1, got {band_limit}")
    if band_limit >= grid.n // 4:
        raise ConfigError(
            f"band_limit {band_limit} is not resolved: needs band_limit < n/4 = {grid.n // 4}"
        )
    if m_target < 0:
        raise ConfigError(f"M_target must be >= 0, got {m_target}")
    rng = np.random.Generator(np.random.PCG64(seed))
    spec = np.zeros(grid.shape, dtype=complex)
    for m in _canonical_band_modes(grid.d, band_limit):
        a, b = rng.standard_normal(2)
        c = (a + 1j * b) / np.sqrt(2.0)
        idx = tuple(comp % grid.n for comp in m)
        conj_idx = tuple((-comp) % grid.n for comp in m)
        spec[idx] = c
        spec[conj_idx] = np.conj(c)
    vals = np.fft.ifftn(spec * grid.node_count).real
    field = ScalarField(grid, np.ascontiguousarray(vals))
    norm = lq_norm(field, q)
    if m_target == 0.0 or norm == 0.0:
        return ScalarField(grid, np.zeros(grid.shape))
    return ScalarField(grid, field.values * (m_target / norm))


_MODE_RECIPES = {
    # (coefficient, integer mode vector, use cosine?) per dimension
    1: [(0.05, (1,), True), (-0.03, (2,), False)],
    2: [(0.05, (1, 0), True), (0.035, (0, 1), False), (-0.02, (1, 1), True)],
    3: [(0.04, (1, 0, 0), True), (0.025, (0, 1, 1), False), (-0.015, (1, 0, -1), True)],
}


def manufactured_field(grid: GridSpec) -> ScalarField:
    """The fixed low-band trigonometric polynomial u* used as a solver oracle."""
    coords = grid.coords()
    vals = np.zeros(grid.shape)
    for coeff, modes, use_cos in _MODE_RECIPES[grid.d]:
        phase = np.zeros(grid.shape)
        for axis, m in enumerate(modes):
            if m:
                phase = phase + 2.0 * np.pi * m * coords[axis]
        vals = vals + coeff * (np.cos(phase) if use_cos else np.sin(phase))
    return ScalarField(grid, vals)


def manufactured_problem(
    grid: GridSpec, H: Hamiltonian, q: float, ws: SpectrumWorkspace | None = None
) -> tuple[ErgodicProblem, ScalarField]:
    """(problem, u*) with f* induced by u* through the discrete operator.

    f* = -Lap(u*) + H(Du*) evaluated with the solver's own dealiased
    pipeline, so (u*, lambda = 0) satisfies the discrete system exactly
    and any recovery error is attributable to the iteration, not the
    operator.  u* has zero mean by construction.
    """
    if ws is None:
        ws = SpectrumWorkspace(grid)
    u_star = manufactured_field(grid)
    placeholder = ErgodicProblem(
        f=ScalarField(grid, np.zeros(grid.shape)), H=H, q=q
    )
    op = _Operator(placeholder, ws)
    uhat = ws.fft(u_star.values)
    ham_hat, _ = op.ham_spectrum(uhat)
    fvals = ws.ifft_real(-ws.lap_mult * uhat + ham_hat, what="manufactured source")
    prob = ErgodicProblem(f=ScalarField(grid, fvals), H=H, q=q)
    return prob, u_star
