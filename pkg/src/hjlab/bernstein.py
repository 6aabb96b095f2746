"""Computable skeleton of the superlevel-set regularity estimate.

This module measures, on solver output, the ingredients the a priori
estimate is built from: the exponent bookkeeping (delta, p, beta, eta),
the auxiliary function g and its pointwise inequalities, the
integration-by-parts identity produced by the test functions
phi_j = -2 d_j(g' d_j u w_k^beta), the superlevel functional Y_k, and the
alternative function F(Z) = Z^((d-2)/d) - Z with its root structure.

`derive_exponents` is written with plain arithmetic only, so feeding it
`fractions.Fraction` inputs keeps every identity exact; the test suite
exploits that for the exponent-algebra oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .backend import kernels
from .errors import AdmissibilityError, DomainError
from .solver import ErgodicProblem, ErgodicSolution
from .torus import ScalarField, SpectrumWorkspace, gradient, hessian, lq_norm

# -- exponents ---------------------------------------------------------------


@dataclass(frozen=True)
class Exponents:
    """Derived exponent bundle; `used_fallback` marks the p-tilde branch."""

    gamma: object
    q: object
    d: int
    delta: object
    delta_max: object
    p: object
    beta: object
    eta: object
    used_fallback: bool

    def to_dict(self) -> dict:
        return {
            "gamma": float(self.gamma),
            "q": float(self.q),
            "d": self.d,
            "delta": float(self.delta),
            "delta_max": float(self.delta_max),
            "p": float(self.p),
            "beta": float(self.beta),
            "eta": float(self.eta),
            "used_fallback": self.used_fallback,
        }


def critical_exponent(gamma, d):
    """d (gamma - 1) / gamma, the admissibility threshold for q."""
    return d * (gamma - 1) / gamma


def derive_exponents(gamma, q, d: int, delta=None) -> Exponents:
    """Derive (delta, p, beta, eta) from (gamma, q, d).

    For d >= 3 with p = (2/d)(d/gamma') + q(d-2)/d > 2 the exact-identity
    branch is taken; otherwise (including d in {1, 2}, where the Sobolev
    embedding covers every finite exponent) the fallback p-tilde =
    (2 + q)/2 is used and the balance identity becomes a strict
    inequality.  `delta` defaults to min(delta_max / 2, 1/10); an explicit
    value is validated against the same constraints.

    Works elementwise for floats and exactly for `fractions.Fraction`.
    """
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if not gamma > 1:
        raise AdmissibilityError(f"admissibility violated: gamma > 1 fails (gamma = {gamma})")
    crit = critical_exponent(gamma, d)
    if not q > crit:
        raise AdmissibilityError(
            f"admissibility violated: q > d(gamma-1)/gamma fails (q = {q}, threshold = {crit})"
        )
    if not q > 2:
        raise AdmissibilityError(f"admissibility violated: q > 2 fails (q = {q})")

    used_fallback = True
    p = (2 + q) / 2
    if d >= 3:
        p_formula = 2 * (gamma - 1) / gamma + (d - 2) * q / d
        if p_formula > 2:
            p = p_formula
            used_fallback = False

    delta_sup = min(gamma * (p - 2) / 2, (q - p) / (p * q))  # beta > 1 and delta p q/(q-p) < 1
    if isinstance(delta_sup, Fraction):
        tenth = Fraction(1, 10)
        one = Fraction(1)
    else:
        tenth = 0.1
        one = 1.0
    delta_max = min(one, delta_sup)

    if delta is None:
        delta = min(delta_max / 2, tenth)
    else:
        if not (0 < delta < 1):
            raise DomainError(f"delta must lie in (0, 1), got {delta}")
        if not delta < gamma * (p - 2) / 2:
            raise DomainError(
                f"delta = {delta} violates beta > 1 (needs delta < {gamma * (p - 2) / 2})"
            )
        if not delta * p * q / (q - p) < 1:
            raise DomainError(
                f"delta = {delta} violates delta*p*q/(q-p) < 1 (needs delta < {(q - p) / (p * q)})"
            )

    beta = (gamma * (p - 2) + 1 - delta) / (1 + delta)
    eta = (2 * gamma + delta - 1) / (1 + delta)
    return Exponents(
        gamma=gamma,
        q=q,
        d=d,
        delta=delta,
        delta_max=delta_max,
        p=p,
        beta=beta,
        eta=eta,
        used_fallback=used_fallback,
    )


def nominal_exponents(gamma: float, q: float, d: int, delta: float) -> Exponents:
    """Exponent carrier for inadmissible (gamma, q): only delta is meaningful.

    Critical-case experiments still need a delta to evaluate superlevel
    curves; p/beta/eta are recorded as NaN so nothing downstream can
    silently use them.
    """
    if not (0 < delta < 1):
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    nan = float("nan")
    return Exponents(
        gamma=float(gamma),
        q=float(q),
        d=d,
        delta=float(delta),
        delta_max=nan,
        p=nan,
        beta=nan,
        eta=nan,
        used_fallback=False,
    )


# -- the auxiliary function g -------------------------------------------------


def g_eval(s, delta):
    """g(s) = 2/(1+delta) (1+s)^((1+delta)/2) and its first two derivatives.

    Accepts scalars or arrays; s must be >= 0 and delta in (0, 1).
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise DomainError("g is only evaluated at s = |Du|^2 >= 0")
    base = 1.0 + s
    g = (2.0 / (1.0 + delta)) * base ** ((1.0 + delta) / 2.0)
    gp = base ** ((delta - 1.0) / 2.0)
    gpp = ((delta - 1.0) / 2.0) * base ** ((delta - 3.0) / 2.0)
    return g, gp, gpp


# -- pointwise inequality audit ----------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    """Max signed violation per audited inequality (positive = violated)."""

    violations: dict
    scales: dict

    def tolerance(self, name: str) -> float:
        return 1e-12 + 1e-10 * self.scales[name]

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance(k) for k, v in self.violations.items())

    def to_dict(self) -> dict:
        return {
            name: {
                "max_violation": self.violations[name],
                "tolerance": self.tolerance(name),
                "passed": bool(self.violations[name] <= self.tolerance(name)),
            }
            for name in self.violations
        }


def pointwise_audit(u: ScalarField, exps: Exponents, ws: SpectrumWorkspace) -> AuditReport:
    """Evaluate the proof's pointwise inequalities at every node, s = |Du|^2.

    Audited (each an algebraic fact, so violations beyond roundoff indicate
    a bug):  g'(s) sqrt(s) <= (1+s)^(delta/2);  g' + 2 s g'' >= delta g';
    |D^2u|^2 >= (Lap u)^2 / d;  (1+s)^gamma <= 2^(gamma-1) (1 + s^gamma).
    """
    delta = float(exps.delta)
    gam = float(exps.gamma)
    d = u.grid.d
    grad = gradient(u, ws)
    hess = hessian(u, ws)
    s = grad.norm_sq_values()
    _, gp, gpp = g_eval(s, delta)

    lhs1 = gp * np.sqrt(s)
    rhs1 = (1.0 + s) ** (delta / 2.0)
    lhs2 = delta * gp
    rhs2 = gp + 2.0 * s * gpp
    lap_sq = hess.trace_values() ** 2
    frob = hess.frobenius_sq_values()
    lhs4 = (1.0 + s) ** gam
    rhs4 = 2.0 ** (gam - 1.0) * (1.0 + s**gam)

    violations = {
        "g_prime_sqrt": float((lhs1 - rhs1).max()),
        "g_convexity": float((lhs2 - rhs2).max()),
        "hessian_cauchy_schwarz": float((lap_sq / d - frob).max()),
        "power_convexity": float((lhs4 - rhs4).max()),
    }
    scales = {
        "g_prime_sqrt": float(np.maximum(np.abs(lhs1), np.abs(rhs1)).max()),
        "g_convexity": float(np.maximum(np.abs(lhs2), np.abs(rhs2)).max()),
        "hessian_cauchy_schwarz": float(np.maximum(lap_sq / d, frob).max()),
        "power_convexity": float(np.maximum(np.abs(lhs4), np.abs(rhs4)).max()),
    }
    return AuditReport(violations=violations, scales=scales)


# -- integration-by-parts identity -------------------------------------------


@dataclass(frozen=True)
class IbpResult:
    lhs: float
    rhs: float
    gap: float


def ibp_identity_residual(
    sol: ErgodicSolution,
    prob: ErgodicProblem,
    exps: Exponents,
    k: float,
    ws: SpectrumWorkspace,
) -> IbpResult:
    """Both sides of the test-function identity at level k, and their gap.

    With w = g(|Du|^2), w_k = (w - k)^+ and the equation's source f - lam:

      lhs = beta Int w_k^(beta-1)|Dw_k|^2
            + Int (4 g'' sum_j (Du . Du_xj)^2 + 2 g' |D^2u|^2) w_k^beta
            + c1 gamma Int |Du|^(gamma-2) Du . Dw_k  w_k^beta
      rhs = -2 Int (f - lam) div(g' Du w_k^beta)

    The identity is exact in the continuum for solutions; the reported gap
    measures discretization plus the kink of (.)^+ along the superlevel
    boundary.  Derivatives of w come from the chain rule on the spectral
    Du and D^2u, never from differentiating the kink spectrally.
    """
    if not k >= 1:
        raise DomainError(f"superlevel threshold must satisfy k >= 1, got {k}")
    if not prob.H.pure_power:
        raise DomainError("the test-function identity is implemented for pure power H")
    delta = float(exps.delta)
    beta = float(exps.beta)
    gam = float(prob.H.gamma)
    c1 = float(prob.H.c1)
    grid = sol.u.grid
    hd = grid.h**grid.d

    grad = gradient(sol.u, ws)
    hess = hessian(sol.u, ws)
    du = [c.values for c in grad.components]
    s = grad.norm_sq_values()
    _, gp, gpp = g_eval(s, delta)
    w = (2.0 / (1.0 + delta)) * (1.0 + s) ** ((1.0 + delta) / 2.0)
    mask = w > k
    wk = np.where(mask, w - k, 0.0)
    wk_b = wk**beta
    wk_bm1 = np.where(mask, wk ** (beta - 1.0), 0.0)

    # dot_j = Du . Du_xj  (column j of the Hessian against Du)
    dots = []
    for j in range(grid.d):
        acc = np.zeros(grid.shape)
        for i in range(grid.d):
            acc += du[i] * hess.comp(i, j).values
        dots.append(acc)
    dw = [2.0 * gp * dots[j] for j in range(grid.d)]
    dwk = [np.where(mask, dw[j], 0.0) for j in range(grid.d)]
    dwk_sq = sum(c * c for c in dwk)
    du_dot_dwk = sum(du[j] * dwk[j] for j in range(grid.d))

    frob = hess.frobenius_sq_values()
    dots_sq = sum(c * c for c in dots)
    du_h_du = sum(dots[j] * du[j] for j in range(grid.d))  # Du^T D^2u Du
    grad_pow = np.where(s > 0.0, s ** ((gam - 2.0) / 2.0), 0.0)

    term1 = beta * float(np.sum(wk_bm1 * dwk_sq))
    term2 = float(np.sum((4.0 * gpp * dots_sq + 2.0 * gp * frob) * wk_b))
    term3 = c1 * gam * float(np.sum(grad_pow * du_dot_dwk * wk_b))
    lhs = hd * (term1 + term2 + term3)

    lap_u = hess.trace_values()
    divergence = (2.0 * gpp * du_h_du + gp * lap_u) * wk_b + beta * gp * wk_bm1 * du_dot_dwk
    f_eff = prob.f.values - sol.lam
    rhs = -2.0 * hd * float(np.sum(f_eff * divergence))

    gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0)
    return IbpResult(lhs=lhs, rhs=rhs, gap=gap)


# -- superlevel curves ---------------------------------------------------------


@dataclass(frozen=True)
class SuperlevelCurve:
    """Sampled (k, Y_k, |{1 + |Du|^2 > k^(2/(1+delta))}|) triples."""

    k_grid: np.ndarray
    Y: np.ndarray
    omega_arg: np.ndarray
    exponents: Exponents

    def excess(self) -> np.ndarray:
        """max(0, Y^theta - Y) with theta the Sobolev-embedding exponent.

        theta = (d-2)/d for d >= 3; for d in {1, 2}, where every finite
        embedding exponent is available, theta = 1/2 is used.
        """
        theta = embedding_exponent(self.exponents.d)
        return np.maximum(0.0, self.Y**theta - self.Y)


def embedding_exponent(d: int) -> float:
    return (d - 2) / d if d >= 3 else 0.5


def superlevel_curve(
    sol: ErgodicSolution,
    exps: Exponents,
    k_grid: np.ndarray,
    ws: SpectrumWorkspace | None = None,
) -> SuperlevelCurve:
    """Y_k = Int ((( 1+|Du|^2 )^((1+delta)/2) - k)^+)^(q gamma/(1+delta)) on a k-grid.

    Rectangle rule over the nodes, accumulated in row-major order (the
    brute-force node loop reproduces it bit for bit).
    """
    k_grid = np.ascontiguousarray(np.asarray(k_grid, dtype=np.float64))
    if k_grid.ndim != 1 or k_grid.size == 0:
        raise DomainError("k_grid must be a non-empty 1-D array")
    if k_grid[0] < 1:
        raise DomainError(f"superlevel thresholds require k >= 1, got {k_grid[0]}")
    if np.any(np.diff(k_grid) <= 0):
        raise DomainError("k_grid must be strictly increasing")
    if ws is None:
        ws = SpectrumWorkspace(sol.u.grid)
    delta = float(exps.delta)
    expo = float(exps.q) * float(exps.gamma) / (1.0 + delta)
    s = gradient(sol.u, ws).norm_sq_values()
    ysum, cnt = kernels.yk_curve(
        np.ascontiguousarray(s.ravel()), k_grid, delta, expo
    )
    hd = sol.u.grid.h**sol.u.grid.d
    return SuperlevelCurve(
        k_grid=k_grid,
        Y=hd * np.asarray(ysum),
        omega_arg=hd * np.asarray(cnt, dtype=np.float64),
        exponents=exps,
    )


def default_k_grid(
    sol: ErgodicSolution,
    exps: Exponents,
    count: int = 64,
    k_min: float = 1.0,
    k_max_factor: float = 1.05,
    ws: SpectrumWorkspace | None = None,
) -> np.ndarray:
    """Geometric k-grid from k_min up to k_max_factor times the field maximum.

    Geometric spacing matches the heavy-tailed decay of Y_k.
    """
    if count < 2:
        raise DomainError("k-grid needs at least 2 points")
    if k_min < 1:
        raise DomainError(f"k_min must be >= 1, got {k_min}")
    if ws is None:
        ws = SpectrumWorkspace(sol.u.grid)
    delta = float(exps.delta)
    s = gradient(sol.u, ws).norm_sq_values()
    vmax = (1.0 + float(s.max())) ** ((1.0 + delta) / 2.0)
    k_max = max(k_max_factor * vmax, k_min * (1.0 + 1e-9))
    return k_min * (k_max / k_min) ** np.linspace(0.0, 1.0, count)


# -- the alternative function F ------------------------------------------------


def f_alternative(d: int) -> tuple[float, float]:
    """Maximizer Z* = ((d-2)/d)^(d/2) of F(Z) = Z^((d-2)/d) - Z, and F* = F(Z*)."""
    if d < 3:
        raise DomainError(f"the alternative function needs d >= 3, got {d}")
    z_star = ((d - 2) / d) ** (d / 2)
    return z_star, _f_of(z_star, d)


def _f_of(z: float, d: int) -> float:
    return z ** ((d - 2) / d) - z


def alternative_roots(omega: float, d: int, tol: float = 1e-12) -> tuple[float, float]:
    """The two roots Z^-(omega) < Z* < Z^+(omega) of F(Z) = omega.

    Bisection on [0, Z*] and [Z*, 1]; F(0) = F(1) = 0 bracket them.  The
    iteration runs until the residual |F(Z) - omega| meets `tol` (F has
    unbounded slope at 0, so a Z-interval criterion alone is not enough).
    For omega >= F* the alternative degenerates and no roots exist.
    """
    z_star, f_star = f_alternative(d)
    if omega < 0:
        raise DomainError(f"omega must be >= 0, got {omega}")
    if omega >= f_star:
        raise DomainError(
            f"no roots: omega = {omega} >= F* = {f_star} (the alternative degenerates)"
        )
    if omega == 0.0:
        return 0.0, 1.0

    def bisect(lo, hi, increasing):
        best, best_res = lo, abs(_f_of(lo, d) - omega)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            val = _f_of(mid, d)
            res = abs(val - omega)
            if res < best_res:
                best, best_res = mid, res
            if res <= tol:
                break
            if (val < omega) == increasing:
                lo = mid
            else:
                hi = mid
        return best

    return bisect(0.0, z_star, True), bisect(z_star, 1.0, False)


def k_star(du_l1: float, t_star: float, delta: float) -> float:
    """Threshold k* = (||Du||_L1 / t* + 1)^((1+delta)/2)."""
    if not t_star > 0:
        raise DomainError(f"t_star must be positive, got {t_star}")
    return (du_l1 / t_star + 1.0) ** ((1.0 + delta) / 2.0)


# -- empirical omega envelope ---------------------------------------------------


@dataclass(frozen=True)
class OmegaEnvelope:
    """Running-max envelope e(t) of the pooled excesses against superlevel measure.

    An empirical surrogate for the modulus in the superlevel inequality:
    only the qualitative behavior (e(t) -> 0 as t -> 0) is asserted.
    """

    t: np.ndarray
    e: np.ndarray
    provenance: tuple

    def at(self, t: float) -> float:
        """Envelope value at t: max excess over all samples with measure <= t."""
        idx = np.searchsorted(self.t, t, side="right") - 1
        return float(self.e[idx]) if idx >= 0 else 0.0


def omega_envelope(curves, provenance=None) -> OmegaEnvelope:
    """Pool (omega_arg, excess) pairs from many curves; e = running max in t."""
    curves = list(curves)
    if not curves:
        raise DomainError("omega_envelope needs at least one curve")
    ts = np.concatenate([c.omega_arg for c in curves])
    ex = np.concatenate([c.excess() for c in curves])
    order = np.argsort(ts, kind="stable")
    ts = ts[order]
    ex = np.maximum.accumulate(ex[order])
    if provenance is None:
        provenance = tuple(range(len(curves)))
    return OmegaEnvelope(t=ts, e=ex, provenance=tuple(provenance))


# -- regularity report ----------------------------------------------------------


@dataclass(frozen=True)
class RegularityReport:
    """Norm bundle for one solved instance, measured against f - lambda."""

    norm_lap_q: float
    norm_gradpow_q: float
    norm_du_l1: float
    norm_f_eff_q: float
    norm_f_raw_q: float
    m_emp: float
    k_emp: float
    lam: float
    q: float
    gamma: float
    grid_d: int
    grid_n: int
    exponents: Exponents | None

    def to_dict(self) -> dict:
        return {
            "norm_lap_q": self.norm_lap_q,
            "norm_gradpow_q": self.norm_gradpow_q,
            "norm_du_l1": self.norm_du_l1,
            "norm_f_eff_q": self.norm_f_eff_q,
            "norm_f_raw_q": self.norm_f_raw_q,
            "M_emp": self.m_emp,
            "K_emp": self.k_emp,
            "lambda": self.lam,
            "q": self.q,
            "gamma": self.gamma,
            "grid": {"d": self.grid_d, "n": self.grid_n},
            "exponents": None if self.exponents is None else self.exponents.to_dict(),
        }


def regularity_report(
    sol: ErgodicSolution,
    prob: ErgodicProblem,
    exps: Exponents | None,
    ws: SpectrumWorkspace | None = None,
) -> RegularityReport:
    """Measure ||Lap u||_q, || |Du|^gamma ||_q, ||Du||_L1 and the effective source."""
    if ws is None:
        ws = SpectrumWorkspace(sol.u.grid)
    grid = sol.u.grid
    q = float(prob.q)
    gam = float(prob.H.gamma)
    lap_vals = ws.ifft_real(ws.lap_mult * ws.fft(sol.u.values), what="laplacian")
    s = gradient(sol.u, ws).norm_sq_values()
    gradpow = ScalarField(grid, s ** (gam / 2.0))
    grad_mag = ScalarField(grid, np.sqrt(s))
    f_eff = ScalarField(grid, prob.f.values - sol.lam)
    norm_lap = lq_norm(ScalarField(grid, lap_vals), q)
    norm_gradpow = lq_norm(gradpow, q)
    norm_du_l1 = lq_norm(grad_mag, 1.0)
    norm_f_eff = lq_norm(f_eff, q)
    norm_f_raw = lq_norm(prob.f, q)
    return RegularityReport(
        norm_lap_q=norm_lap,
        norm_gradpow_q=norm_gradpow,
        norm_du_l1=norm_du_l1,
        norm_f_eff_q=norm_f_eff,
        norm_f_raw_q=norm_f_raw,
        m_emp=norm_f_eff + norm_du_l1,
        k_emp=norm_lap + norm_gradpow,
        lam=sol.lam,
        q=q,
        gamma=gam,
        grid_d=grid.d,
        grid_n=grid.n,
        exponents=exps,
    )
