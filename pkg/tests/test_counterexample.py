"""Radial counterexample family: cutoff, closed forms, PDE residual, norms,
scaling invariance and the logarithmic divergence law."""

import math

import numpy as np
import pytest

import hjlab
from hjlab.counterexample import CutoffProfile, NormRow, NormTable, RadialProfile
from hjlab.errors import DomainError
from hjlab.quadrature import adaptive_integral

EPS_SWEEP = [2.0**-k for k in range(4, 10)]


class TestQuadrature:
    def test_polynomial_exact(self):
        assert adaptive_integral(lambda x: 3 * x * x, 0.0, 2.0) == pytest.approx(
            8.0, rel=1e-13
        )

    def test_logarithmic_integrand(self):
        val = adaptive_integral(lambda x: 1.0 / x, 0.01, 0.5, rel_tol=1e-12)
        assert val == pytest.approx(math.log(50.0), rel=1e-11)

    def test_breakpoints_align_with_kinks(self):
        f = lambda x: abs(x - 0.3)
        exact = 0.3**2 / 2 + 0.7**2 / 2
        val = adaptive_integral(f, 0.0, 1.0, rel_tol=1e-12, breakpoints=(0.3,))
        assert val == pytest.approx(exact, rel=1e-12)

    def test_orientation_and_empty(self):
        assert adaptive_integral(lambda x: x, 1.0, 1.0) == 0.0
        a = adaptive_integral(lambda x: x * x, 0.0, 1.0)
        b = adaptive_integral(lambda x: x * x, 1.0, 0.0)
        assert a == -b

    def test_min_depth_refinement_stable(self):
        f = lambda x: math.exp(-x) / (x + 0.01)
        v1 = adaptive_integral(f, 0.0, 1.0, rel_tol=1e-11, min_depth=2)
        v2 = adaptive_integral(f, 0.0, 1.0, rel_tol=1e-11, min_depth=3)
        assert abs(v1 - v2) / abs(v1) < 1e-9


class TestCutoff:
    def test_support_structure(self):
        chi = CutoffProfile()
        t = np.array([-1.0, 0.5, 1.0, 1.2, 1.5, 1.8, 2.0, 5.0])
        vals = chi.chi(t)
        assert np.all(vals[t <= 1.0] == 0.0)
        assert np.all(vals[t >= 2.0] == 1.0)
        assert np.all((vals >= 0.0) & (vals <= 1.0))
        assert np.all(np.diff(chi.chi(np.linspace(0.5, 2.5, 201))) >= -1e-15)

    def test_symmetric_midpoint(self):
        chi = CutoffProfile()
        assert float(chi.chi(1.5)) == pytest.approx(0.5, abs=1e-14)

    def test_derivative_support_and_smooth_matching(self):
        chi = CutoffProfile()
        t = np.linspace(0.0, 3.0, 301)
        dchi = chi.chi_prime(t)
        assert np.all(dchi[(t <= 1.0) | (t >= 2.0)] == 0.0)
        assert np.all(dchi >= 0.0)
        # all derivatives vanish at the matching points
        assert float(chi.chi_prime(1.0 + 1e-4)) < 1e-100
        assert float(chi.chi_prime(2.0 - 1e-4)) < 1e-100

    def test_derivative_consistency(self):
        chi = CutoffProfile()
        t = np.linspace(1.05, 1.95, 19)
        step = 1e-7
        fd = (chi.chi(t + step) - chi.chi(t - step)) / (2 * step)
        assert np.abs(fd - chi.chi_prime(t)).max() < 1e-6


class TestConstants:
    def test_c_constant_values(self):
        assert hjlab.c_constant(3.0, 3) == pytest.approx(-math.sqrt(1.5), rel=1e-12)
        assert hjlab.c_constant(2.0, 3) == pytest.approx(-1.0, abs=1e-15)

    def test_c_constant_rejects_subcoercive(self):
        with pytest.raises(DomainError, match="d/\\(d-1\\)"):
            hjlab.c_constant(4.0 / 3.0, 3)

    def test_critical_q(self):
        assert hjlab.critical_q(3.0, 3) == pytest.approx(2.0)
        assert hjlab.critical_q(2.0, 4) == pytest.approx(2.0)
        assert hjlab.critical_q(2.0, 3) == pytest.approx(1.5)

    def test_profile_validation(self):
        with pytest.raises(DomainError):
            RadialProfile(gamma=3.0, d=5, eps=0.1)
        with pytest.raises(DomainError):
            RadialProfile(gamma=3.0, d=3, eps=0.3)


class TestProfileEval:
    def test_boundary_value_zero(self):
        prof = RadialProfile(gamma=3.0, d=3, eps=1 / 32)
        v, _, _ = hjlab.profile_eval(prof, 0.5)
        assert v == 0.0

    def test_inside_cutoff_support(self):
        prof = RadialProfile(gamma=3.0, d=3, eps=1 / 32)
        v, vp, f = hjlab.profile_eval(prof, 1 / 64)
        assert vp == 0.0 and f == 0.0
        assert v < 0.0  # c < 0 makes the profile nonpositive

    def test_outside_transition_f_vanishes(self):
        prof = RadialProfile(gamma=3.0, d=3, eps=1 / 32)
        _, vp, f = hjlab.profile_eval(prof, 0.25)
        assert f == 0.0
        assert vp > 0.0

    def test_nonpositive_and_nondecreasing(self):
        # c < 0 and a nonnegative integrand make v <= 0, rising to 0 at 1/2
        prof = RadialProfile(gamma=2.0, d=3, eps=1 / 16)
        r = np.linspace(0.01, 0.5, 40)
        v, _, _ = hjlab.profile_eval(prof, r)
        assert np.all(v <= 1e-15)
        assert np.all(np.diff(v) >= -1e-12)

    def test_rejects_bad_radius(self):
        prof = RadialProfile(gamma=3.0, d=3, eps=1 / 16)
        with pytest.raises(DomainError):
            hjlab.profile_eval(prof, 0.0)
        with pytest.raises(DomainError):
            hjlab.profile_eval(prof, 0.6)


class TestRadialResidual:
    @pytest.mark.parametrize("gamma,d", [(3.0, 3), (2.0, 3), (2.0, 4), (3.0, 2)])
    def test_pde_satisfied_for_family(self, gamma, d):
        worst = 0.0
        for eps in EPS_SWEEP:
            prof = RadialProfile(gamma=gamma, d=d, eps=eps)
            radii = np.geomspace(eps / 4.0, 0.499, 1000)
            worst = max(worst, hjlab.radial_residual(prof, radii))
        assert worst <= 1e-10

    def test_pure_power_region_cancels(self):
        # for r >= 2 eps the c-relation cancels the equation exactly
        prof = RadialProfile(gamma=3.0, d=3, eps=1 / 32)
        radii = np.linspace(3 / 32, 0.49, 100)
        assert hjlab.radial_residual(prof, radii) <= 1e-13


class TestBallNorms:
    def test_source_norm_invariant_at_critical_q(self):
        norms = []
        for eps in EPS_SWEEP:
            prof = RadialProfile(gamma=3.0, d=3, eps=eps)
            nf, _ = hjlab.ball_norms(prof, 2.0)
            norms.append(nf)
        spread = (max(norms) - min(norms)) / min(norms)
        assert spread < 1e-8

    def test_gradient_norm_grows(self):
        vals = []
        for eps in EPS_SWEEP:
            prof = RadialProfile(gamma=3.0, d=3, eps=eps)
            _, ng = hjlab.ball_norms(prof, 2.0)
            vals.append(ng)
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_sharp_cutoff_closed_form(self):
        # indicator cutoff: ||grad-pow||_q^q = |c|^(gamma q) sigma ln(1/(2 eps))
        for eps in (1 / 16, 1 / 128):
            prof = RadialProfile(gamma=3.0, d=3, eps=eps, cutoff=CutoffProfile(sharp=True))
            _, ng = hjlab.ball_norms(prof, 2.0)
            exact = (1.5**3 * 4 * math.pi * math.log(1 / (2 * eps))) ** 0.5
            assert ng == pytest.approx(exact, rel=1e-9)

    def test_refinement_depth_oracle(self):
        prof = RadialProfile(gamma=3.0, d=3, eps=1 / 64)
        a = hjlab.ball_norms(prof, 2.0, min_depth=1)
        b = hjlab.ball_norms(prof, 2.0, min_depth=2)
        for x, y in zip(a, b):
            assert abs(x - y) / abs(x) < 1e-9


class TestDivergenceFit:
    def test_synthetic_exact(self):
        rows = tuple(
            NormRow(eps=e, q=2.0, norm_f=1.0, norm_grad_pow=(2.0 * math.log(1 / e) + 1.0) ** 0.5)
            for e in EPS_SWEEP
        )
        fit = hjlab.divergence_fit(NormTable(rows=rows, quad_tol=1e-9))
        assert fit.slope == pytest.approx(2.0, rel=1e-12)
        assert fit.intercept == pytest.approx(1.0, rel=1e-10)
        assert fit.max_rel_residual < 1e-12

    def test_critical_slope_matches_derived_constant(self):
        table = hjlab.build_norm_table(3.0, 3, None, EPS_SWEEP)
        fit = hjlab.divergence_fit(table)
        expected = 1.5**3 * 4 * math.pi  # |c|^(gamma q) * sphere area
        assert fit.slope == pytest.approx(expected, rel=0.02)
        assert fit.max_rel_residual <= 0.02

    def test_supercritical_q_breaks_the_log_law(self):
        table = hjlab.build_norm_table(3.0, 3, 2.5, EPS_SWEEP)
        fit = hjlab.divergence_fit(table)
        assert fit.max_rel_residual > 0.05  # power law, not logarithmic

    def test_needs_four_rows(self):
        table = hjlab.build_norm_table(3.0, 3, None, EPS_SWEEP[:3])
        with pytest.raises(DomainError, match=">= 4"):
            hjlab.divergence_fit(table)
