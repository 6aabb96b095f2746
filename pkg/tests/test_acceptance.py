"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines live.
The solver ensembles are built once per session and shared.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

import hjlab
from hjlab.bernstein import g_eval
from hjlab.counterexample import RadialProfile
from hjlab.runner import quantile_k_values
from hjlab.torus import gradient

pytestmark = pytest.mark.acceptance

# criterion 3 / 10 ensemble: d=2, gamma=3, q=4, M=5, n=64, 20 runs, fixed seeds
ENSEMBLE_SEED = 500
ENSEMBLE_SIZE = 20
# regression pin for the fixed-seed ensemble (criterion 10)
K_EMP_PINNED = None  # set below once frozen


def _report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))


def _run_ensemble(n, gamma, q, m_target, size, seed, band=8):
    grid = hjlab.GridSpec(2, n)
    ws = hjlab.SpectrumWorkspace(grid)
    H = hjlab.Hamiltonian(gamma=gamma)
    exps = hjlab.derive_exponents(gamma, q, 2)
    out = []
    for i in range(size):
        f = hjlab.generate_source(seed + i, band, m_target, q, grid)
        prob = hjlab.ErgodicProblem(f=f, H=H, q=q)
        sol = hjlab.solve(prob, hjlab.SolveSettings(), ws)
        rep = hjlab.regularity_report(sol, prob, exps, ws)
        curve = hjlab.superlevel_curve(sol, exps, hjlab.default_k_grid(sol, exps, ws=ws), ws)
        out.append((sol, prob, rep, curve))
    return out, ws, exps


@pytest.fixture(scope="session")
def ensemble_g3_64():
    t0 = time.perf_counter()
    runs, ws, exps = _run_ensemble(64, 3.0, 4.0, 5.0, ENSEMBLE_SIZE, ENSEMBLE_SEED)
    return runs, ws, exps, time.perf_counter() - t0


@pytest.fixture(scope="session")
def ensemble_g3_128():
    t0 = time.perf_counter()
    runs, ws, exps = _run_ensemble(128, 3.0, 4.0, 5.0, ENSEMBLE_SIZE, ENSEMBLE_SEED)
    return runs, ws, exps, time.perf_counter() - t0


@pytest.fixture(scope="session")
def ensemble_g2_64():
    runs, ws, exps = _run_ensemble(64, 2.0, 4.0, 3.0, 8, 900, band=6)
    return runs, ws, exps


def test_criterion_01_spectral_calculus_exactness():
    """Gradient/Laplacian/Hessian match analytic trig sums on resolved modes."""
    ok = False
    t0 = time.perf_counter()
    worst = 0.0
    try:
        for d in (1, 2, 3):
            for n in (32, 64, 128):
                grid = hjlab.GridSpec(d, n)
                ws = hjlab.SpectrumWorkspace(grid)
                rng = np.random.default_rng(1000 * d + n)
                lim = n // 4
                # low, mid, and band-edge single-axis modes plus a random
                # oblique one touching every axis
                modes = []
                for p in (1, lim // 2, lim - 1):
                    vec = np.zeros(d, dtype=int)
                    vec[int(rng.integers(0, d))] = p
                    modes.append(tuple(vec))
                modes.append(tuple(int(m) for m in rng.integers(1, lim, size=d)))
                coeffs = rng.standard_normal(len(modes))

                x = grid.coords()
                cosines = []
                sines = []
                vals = np.zeros(grid.shape)
                for c, mv in zip(coeffs, modes):
                    phase = np.zeros(grid.shape)
                    for ax, m in enumerate(mv):
                        phase = phase + 2 * np.pi * m * x[ax]
                    cosines.append(np.cos(phase))
                    sines.append(np.sin(phase))
                    vals += c * cosines[-1]
                u = hjlab.ScalarField(grid, vals)
                del vals

                def analytic(weight_fn, trig):
                    out = np.zeros(grid.shape)
                    for c, mv, arr in zip(coeffs, modes, trig):
                        out += c * weight_fn(mv) * arr
                    return out

                lap_ref = analytic(
                    lambda mv: -4 * np.pi**2 * sum(m * m for m in mv), cosines
                )
                scale = max(1.0, float(np.abs(lap_ref).max()))

                def check(got, ref):
                    nonlocal worst
                    err = float(np.abs(got - ref).max())
                    worst = max(worst, err / scale)
                    assert err <= 1e-11 * scale

                got_grad = hjlab.gradient(u, ws)
                for ax in range(d):
                    check(
                        got_grad.components[ax].values,
                        analytic(lambda mv: -2 * np.pi * mv[ax], sines),
                    )
                del got_grad
                check(hjlab.laplacian(u, ws).values, lap_ref)
                del lap_ref
                got_hess = hjlab.hessian(u, ws)
                for i in range(d):
                    for j in range(i, d):
                        check(
                            got_hess.comp(i, j).values,
                            analytic(
                                lambda mv: -4 * np.pi**2 * mv[i] * mv[j], cosines
                            ),
                        )
                del got_hess, cosines, sines
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0
        ok = True
    finally:
        _report(
            "criterion 1 (spectral calculus exactness)",
            ok,
            f"worst scaled error {worst:.2e}, {time.perf_counter() - t0:.1f}s",
        )


def test_criterion_02_manufactured_recovery():
    """solve() recovers the manufactured state to 1e-8 in discrete sup norm."""
    ok = False
    t0 = time.perf_counter()
    worst = 0.0
    try:
        for d in (1, 2):
            for gamma in (2.0, 3.0):
                grid = hjlab.GridSpec(d, 64)
                ws = hjlab.SpectrumWorkspace(grid)
                prob, u_star = hjlab.manufactured_problem(
                    grid, hjlab.Hamiltonian(gamma=gamma), 4.0, ws
                )
                sol = hjlab.solve(prob, hjlab.SolveSettings(), ws)
                assert sol.converged
                err = float(np.abs(sol.u.values - u_star.values).max())
                worst = max(worst, err)
                assert err <= 1e-8
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0
        ok = True
    finally:
        _report(
            "criterion 2 (manufactured-solution recovery)",
            ok,
            f"worst recovery {worst:.2e}, {time.perf_counter() - t0:.1f}s",
        )


def test_criterion_03_conservation_identity(ensemble_g3_64):
    """|mean(H(Du)) + lambda - mean(f)| <= 1e-9 on every converged run."""
    runs, ws, _, build_seconds = ensemble_g3_64
    ok = False
    worst = 0.0
    try:
        assert len(runs) == ENSEMBLE_SIZE
        for sol, prob, _, _ in runs:
            assert sol.converged
            drift = hjlab.integral_identity_check(sol, prob, ws)
            worst = max(worst, drift)
            assert drift <= 1e-9
        assert build_seconds < 300.0
        ok = True
    finally:
        _report(
            "criterion 3 (conservation identity)",
            ok,
            f"worst drift {worst:.2e}, ensemble built in {build_seconds:.0f}s",
        )


def test_criterion_04_hopf_cole_oracle(ensemble_g2_64):
    """gamma = 2 ensembles: linearized residual of exp(-u) below 1e-7."""
    runs, ws, _ = ensemble_g2_64
    ok = False
    worst = 0.0
    try:
        for sol, prob, _, _ in runs:
            assert sol.converged
            resid = hjlab.hopf_cole_residual(sol, prob, ws)
            worst = max(worst, resid)
            assert resid <= 1e-7
        ok = True
    finally:
        _report(
            "criterion 4 (Hopf-Cole oracle)", ok, f"worst residual {worst:.2e}"
        )


def test_criterion_05_exponent_algebra_rational():
    """Exponent identities hold exactly in Q for 100 random admissible tuples."""
    import random

    ok = False
    t0 = time.perf_counter()
    fallback_count = 0
    try:
        rng = random.Random(77)
        checked = 0
        while checked < 100:
            force = checked % 5 < 2  # steer ~40% of draws at the p-tilde branch
            if force:
                d = 3
                gamma = Fraction(rng.randrange(11, 29), 10)
                hi = Fraction(d, d - 2) * (2 - 2 * (gamma - 1) / gamma)
                if hi <= 2:
                    continue
                q = 2 + Fraction(rng.randrange(1, 20), 20) * min(hi - 2, Fraction(3))
            else:
                d = rng.choice([3, 4, 5, 6])
                gamma = Fraction(rng.randrange(11, 50), 10)
                q = Fraction(rng.randrange(21, 90), 10)
            crit = d * (gamma - 1) / gamma
            if not (q > crit and q > 2):
                continue
            e = hjlab.derive_exponents(gamma, q, d)
            # (cho1): eta = ((delta-1)/(1+delta)) p/(p-2) + 2 beta/(p-2)
            assert (
                (e.delta - 1) / (1 + e.delta) * e.p / (e.p - 2) + e.beta * 2 / (e.p - 2)
                == e.eta
            )
            # beta + eta = p gamma / (1 + delta)
            assert e.beta + e.eta == e.p * gamma / (1 + e.delta)
            assert e.beta > 1
            assert e.delta * e.p * e.q / (e.q - e.p) < 1
            balance = (e.beta + 1) * Fraction(d, d - 2)
            target = gamma * q / (1 + e.delta)
            if e.used_fallback:
                fallback_count += 1
                assert balance > target  # (chobis), strict
            else:
                assert balance == target  # (cho2), exact
            checked += 1
        assert fallback_count >= 20
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0
        ok = True
    finally:
        _report(
            "criterion 5 (exponent algebra, exact rational)",
            ok,
            f"100 tuples, {fallback_count} fallback, {time.perf_counter() - t0 :.2f}s",
        )


def test_criterion_06_ibp_identity(ensemble_g3_64):
    """Test-function identity: gap <= 1e-5 at 5 quantile levels; refines with n."""
    ok = False
    worst64 = 0.0
    try:
        exps = hjlab.derive_exponents(2.0, 4.0, 2)
        grid = hjlab.GridSpec(2, 64)
        ws = hjlab.SpectrumWorkspace(grid)
        prob, _ = hjlab.manufactured_problem(grid, hjlab.Hamiltonian(gamma=2.0), 4.0, ws)
        sol = hjlab.solve(prob, hjlab.SolveSettings(), ws)
        ks = quantile_k_values(sol, exps, ws)
        assert len(ks) == 5
        gaps64 = [hjlab.ibp_identity_residual(sol, prob, exps, k, ws).gap for k in ks]
        worst64 = max(gaps64)
        assert worst64 <= 1e-5

        grid2 = hjlab.GridSpec(2, 128)
        ws2 = hjlab.SpectrumWorkspace(grid2)
        prob2, _ = hjlab.manufactured_problem(grid2, hjlab.Hamiltonian(gamma=2.0), 4.0, ws2)
        sol2 = hjlab.solve(prob2, hjlab.SolveSettings(), ws2)
        gaps128 = [hjlab.ibp_identity_residual(sol2, prob2, exps, k, ws2).gap for k in ks]
        assert max(gaps128) < worst64
        ok = True
    finally:
        _report(
            "criterion 6 (integration-by-parts identity)",
            ok,
            f"worst gap at n=64: {worst64:.2e}",
        )


def test_criterion_07_pointwise_inequalities(ensemble_g3_64, ensemble_g2_64):
    """The audited algebraic inequalities never fail, on fields or samples."""
    ok = False
    worst = -np.inf
    try:
        for runs, ws, exps in (
            (ensemble_g3_64[0], ensemble_g3_64[1], ensemble_g3_64[2]),
            (ensemble_g2_64[0], ensemble_g2_64[1], ensemble_g2_64[2]),
        ):
            for sol, _, _, _ in runs:
                rep = hjlab.pointwise_audit(sol.u, exps, ws)
                assert rep.passed, rep.violations
                worst = max(worst, max(rep.violations.values()))
        # direct (s, delta) sampling of the g-properties
        s = np.concatenate([[0.0], np.logspace(-8, 6, 141)])
        for delta in np.linspace(0.01, 0.99, 50):
            g, gp, gpp = g_eval(s, float(delta))
            v1 = gp * np.sqrt(s) - (1.0 + s) ** (delta / 2.0)
            v2 = delta * gp - (gp + 2.0 * s * gpp)
            scale = float(np.abs(gp).max())
            assert v1.max() <= 1e-12 + 1e-10 * scale
            assert v2.max() <= 1e-12 + 1e-10 * scale
            worst = max(worst, float(v1.max()), float(v2.max()))
        ok = True
    finally:
        _report(
            "criterion 7 (pointwise proof inequalities)",
            ok,
            f"max signed violation {worst:.2e}",
        )


def test_criterion_08_alternative_function():
    """Z*, F* closed forms for d in 3..10; roots invert F to 1e-10."""
    ok = False
    worst = 0.0
    try:
        for d in range(3, 11):
            z_star, f_star = hjlab.f_alternative(d)
            assert abs(z_star - ((d - 2) / d) ** (d / 2)) <= 1e-12
            assert abs(f_star - (z_star ** ((d - 2) / d) - z_star)) <= 1e-12
        rng = np.random.default_rng(13)
        for _ in range(100):
            d = int(rng.integers(3, 11))
            _, f_star = hjlab.f_alternative(d)
            omega = float(rng.uniform(0.0, f_star))
            if omega == 0.0:
                continue
            zm, zp = hjlab.alternative_roots(omega, d)
            z_star = hjlab.f_alternative(d)[0]
            assert 0 < zm < z_star < zp < 1
            for z in (zm, zp):
                err = abs(z ** ((d - 2) / d) - z - omega)
                worst = max(worst, err)
                assert err <= 1e-10
        ok = True
    finally:
        _report(
            "criterion 8 (alternative function F)", ok, f"worst |F(Z)-omega| {worst:.1e}"
        )


def test_criterion_09_counterexample_criticality():
    """Critical-exponent radial family: invariant source norm, log divergence."""
    ok = False
    t0 = time.perf_counter()
    detail = ""
    try:
        eps_list = [2.0**-k for k in range(4, 10)]
        table = hjlab.build_norm_table(3.0, 3, None, eps_list)
        assert table.rows[0].q == pytest.approx(2.0)

        norm_f = [r.norm_f for r in table.rows]
        spread = (max(norm_f) - min(norm_f)) / min(norm_f)
        assert spread <= 1e-8

        fit = hjlab.divergence_fit(table)
        expected_slope = 1.5**3 * 4 * math.pi  # |c|^(gamma q) * sphere area
        assert abs(fit.slope - expected_slope) / expected_slope <= 0.02
        assert fit.max_rel_residual <= 0.02

        worst_res = 0.0
        for eps in eps_list:
            prof = RadialProfile(gamma=3.0, d=3, eps=eps)
            radii = np.geomspace(eps / 4.0, 0.499, 1000)
            worst_res = max(worst_res, hjlab.radial_residual(prof, radii))
        assert worst_res <= 1e-10

        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0
        detail = (
            f"source-norm spread {spread:.1e}, slope {fit.slope:.4f} "
            f"(target {expected_slope:.4f}), pde residual {worst_res:.1e}"
        )
        ok = True
    finally:
        _report("criterion 9 (counterexample criticality)", ok, detail)


def test_criterion_10_empirical_maximal_regularity(ensemble_g3_64, ensemble_g3_128):
    """K_emp finite and grid-stable; pooled envelope vanishes at small measure."""
    runs64, _, _, secs64 = ensemble_g3_64
    runs128, _, _, secs128 = ensemble_g3_128
    ok = False
    detail = ""
    try:
        assert all(sol.converged for sol, _, _, _ in runs64)
        assert all(sol.converged for sol, _, _, _ in runs128)
        k64 = max(rep.k_emp for _, _, rep, _ in runs64)
        k128 = max(rep.k_emp for _, _, rep, _ in runs128)
        assert math.isfinite(k64)
        assert abs(k128 - k64) / k64 < 0.10

        env = hjlab.omega_envelope([curve for _, _, _, curve in runs64])
        e_small, e_large = env.at(0.01), env.at(0.5)
        assert e_small <= e_large / 10.0

        # regression pin for the fixed-seed ensemble
        assert k64 == pytest.approx(5.024434843864894, rel=1e-6)

        assert secs64 + secs128 < 900.0
        detail = (
            f"K_emp(64) = {k64:.6f}, K_emp(128) = {k128:.6f}, "
            f"e(0.01)/e(0.5) = {e_small / e_large:.3e}, "
            f"ensembles in {secs64 + secs128:.0f}s"
        )
        ok = True
    finally:
        _report("criterion 10 (empirical maximal regularity)", ok, detail)


def test_criterion_11_superlevel_machinery(ensemble_g3_64):
    """Y_k: bit-for-bit with a python node loop, monotone, zero past the max."""
    runs, ws, exps = ensemble_g3_64[0], ensemble_g3_64[1], ensemble_g3_64[2]
    ok = False
    checked = 0
    try:
        delta = float(exps.delta)
        expo = float(exps.q) * float(exps.gamma) / (1.0 + delta)
        half = 0.5 * (1.0 + delta)
        for sol, _, _, curve in runs:
            assert np.all(np.diff(curve.Y) <= 0.0)
            assert curve.Y[-1] == 0.0
            assert curve.omega_arg[-1] == 0.0

            s = gradient(sol.u, ws).norm_sq_values().ravel().tolist()
            hd = sol.u.grid.h ** sol.u.grid.d
            kg = curve.k_grid.tolist()
            nk = len(kg)
            thresholds = [math.pow(k, 2.0 / (1.0 + delta)) for k in kg]
            y_acc = [0.0] * nk
            cnt = [0] * nk
            for val in s:
                onps = 1.0 + val
                v = math.pow(onps, half)
                for j in range(nk):
                    if v > kg[j]:
                        y_acc[j] += math.pow(v - kg[j], expo)
                    else:
                        break
                for j in range(nk):
                    if onps > thresholds[j]:
                        cnt[j] += 1
                    else:
                        break
            for j in range(nk):
                assert hd * y_acc[j] == curve.Y[j]
                assert hd * cnt[j] == curve.omega_arg[j]
            checked += 1
        ok = True
    finally:
        _report(
            "criterion 11 (superlevel machinery)",
            ok,
            f"bit-for-bit on {checked} stored solutions",
        )
