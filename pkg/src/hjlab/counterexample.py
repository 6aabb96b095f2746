"""Radial family exhibiting the failure of maximal regularity at the critical
exponent q = d (gamma - 1)/gamma.

The profile is

    v_eps(r) = c * Int_r^(1/2) s^(-1/(gamma-1)) chi(s/eps) ds,
    |c|^gamma = -(d - 1 - 1/(gamma-1)) c,

with chi a smooth cutoff vanishing on (-inf, 1] and equal to 1 on
[2, +inf).  The pair (v_eps, f_eps) solves the equation exactly, with

    f_eps = (c/eps) r^(-1/(gamma-1)) chi'(r/eps)
            + |c|^gamma (chi^gamma - chi) r^(-gamma/(gamma-1)),

supported on the shell eps <= r <= 2 eps.  At the critical exponent the
scaling r -> eps s makes ||f_eps||_q independent of eps exactly, while
|| |Dv_eps|^gamma ||_q^q grows like |c|^(gamma q) * sigma_(d-1) * ln(1/eps).
The rate is not part of the source estimate itself; it follows from the
change of variables and is verified here by quadrature.

Everything is grid-free: 1-D adaptive quadrature in the radial variable,
with panels aligned to the cutoff's support edges at eps and 2 eps.
Note the orientation: c < 0 makes v_eps <= 0 and nondecreasing in r,
vanishing at r = 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .quadrature import adaptive_integral

SPHERE_AREA = {2: 2.0 * math.pi, 3: 4.0 * math.pi, 4: 2.0 * math.pi**2}


# -- cutoff -------------------------------------------------------------------


def _bump(s):
    """exp(-1/s) extended by 0 for s <= 0 (all derivatives vanish at 0)."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / s[pos])
    return out


def _bump_prime(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / s[pos]) / s[pos] ** 2
    return out


@dataclass(frozen=True)
class CutoffProfile:
    """chi: 0 on (-inf, 1], smooth transition on (1, 2), 1 on [2, +inf).

    The transition is psi(t - 1) with psi(s) = E(s)/(E(s) + E(1-s)),
    E(s) = exp(-1/s): a standard smooth partition function, symmetric
    about 1/2, with closed-form derivative.  ``sharp = True`` replaces chi
    by the indicator of [1, +inf) (quadrature-only mode for closed-form
    norm checks; chi' is then reported as 0).
    """

    sharp: bool = False

    def psi(self, s):
        a = _bump(s)
        b = _bump(1.0 - np.asarray(s, dtype=np.float64))
        return np.where(a + b > 0, a / np.where(a + b > 0, a + b, 1.0), 0.0)

    def psi_prime(self, s):
        s = np.asarray(s, dtype=np.float64)
        a = _bump(s)
        b = _bump(1.0 - s)
        ap = _bump_prime(s)
        bp = _bump_prime(1.0 - s)
        denom = (a + b) ** 2
        return np.where(denom > 0, (ap * b + a * bp) / np.where(denom > 0, denom, 1.0), 0.0)

    def chi(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.sharp:
            return np.where(t >= 1.0, 1.0, 0.0)
        out = np.where(t >= 2.0, 1.0, 0.0)
        mid = (t > 1.0) & (t < 2.0)
        out = np.where(mid, self.psi(t - 1.0), out)
        return out

    def chi_prime(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.sharp:
            return np.zeros_like(t)
        mid = (t > 1.0) & (t < 2.0)
        return np.where(mid, self.psi_prime(t - 1.0), 0.0)


# -- profile -------------------------------------------------------------------


def c_constant(gamma: float, d: int) -> float:
    """The (negative) constant with |c|^gamma = -(d - 1 - 1/(gamma-1)) c."""
    if not gamma > 1:
        raise DomainError(f"gamma must exceed 1, got {gamma}")
    coeff = d - 1 - 1.0 / (gamma - 1.0)
    if coeff <= 0:
        raise DomainError(
            f"radial family is meaningful only if gamma > d/(d-1): "
            f"gamma = {gamma}, d = {d} gives d - 1 - 1/(gamma-1) = {coeff} <= 0"
        )
    return -(coeff ** (1.0 / (gamma - 1.0)))


def critical_q(gamma: float, d: int) -> float:
    """The critical Lebesgue exponent d (gamma - 1)/gamma."""
    if not gamma > 1:
        raise DomainError(f"gamma must exceed 1, got {gamma}")
    return d * (gamma - 1.0) / gamma


@dataclass(frozen=True)
class RadialProfile:
    """One member of the family: (gamma, d, eps) plus its cutoff."""

    gamma: float
    d: int
    eps: float
    cutoff: CutoffProfile = field(default_factory=CutoffProfile)

    def __post_init__(self):
        if self.d not in SPHERE_AREA:
            raise DomainError(f"d must be one of {sorted(SPHERE_AREA)}, got {self.d}")
        if not 0 < self.eps <= 0.25:
            raise DomainError(f"eps must lie in (0, 1/4], got {self.eps}")
        c_constant(self.gamma, self.d)  # validates gamma > d/(d-1)

    @property
    def c(self) -> float:
        return c_constant(self.gamma, self.d)

    @property
    def power(self) -> float:
        """The profile exponent a = 1/(gamma - 1)."""
        return 1.0 / (self.gamma - 1.0)


def profile_eval(prof: RadialProfile, r, rel_tol: float = 1e-11):
    """(v, v', f) at radius r in (0, 1/2].

    v comes from adaptive quadrature of the defining integral; v' and f are
    closed forms.  Scalar in, scalar out; array in, array out.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if np.any(r_arr <= 0):
        raise DomainError("radius must be positive")
    if np.any(r_arr > 0.5):
        raise DomainError("radius must lie in (0, 1/2]")
    a = prof.power
    c = prof.c
    eps = prof.eps
    chi = prof.cutoff.chi
    chip = prof.cutoff.chi_prime

    def integrand(s):
        return s ** (-a) * float(chi(s / eps))

    v = np.empty_like(r_arr)
    for i, ri in enumerate(r_arr):
        lo = max(ri, eps)  # chi kills the integrand below eps
        if lo >= 0.5:
            v[i] = 0.0
        else:
            v[i] = c * adaptive_integral(
                integrand, lo, 0.5, rel_tol=rel_tol, breakpoints=(2.0 * eps,)
            )
    vp = -c * r_arr ** (-a) * chi(r_arr / eps)
    f = (c / eps) * r_arr ** (-a) * chip(r_arr / eps) + abs(c) ** prof.gamma * (
        chi(r_arr / eps) ** prof.gamma - chi(r_arr / eps)
    ) * r_arr ** (-prof.gamma * a)
    if np.isscalar(r) or np.ndim(r) == 0:
        return float(v[0]), float(vp[0]), float(f[0])
    return v, vp, f


def radial_residual(prof: RadialProfile, r_samples) -> float:
    """Max scaled PDE residual of (v_eps, f_eps) over the sample radii.

    Uses the closed forms v' and v'' (no quadrature), with the radial
    Laplacian v'' + (d-1) v'/r; the result is |residual| / (1 + local
    scale), where the scale is the largest term entering the cancellation.
    """
    r = np.atleast_1d(np.asarray(r_samples, dtype=np.float64))
    if np.any(r <= 0) or np.any(r >= 0.5):
        raise DomainError("sample radii must lie in (0, 1/2)")
    a = prof.power
    c = prof.c
    gam = prof.gamma
    eps = prof.eps
    t = r / eps
    chi = prof.cutoff.chi(t)
    chip = prof.cutoff.chi_prime(t)
    vp = -c * r ** (-a) * chi
    vpp = (c / (gam - 1.0)) * r ** (-gam * a) * chi - (c / eps) * r ** (-a) * chip
    lap = vpp + (prof.d - 1) * vp / r
    f = (c / eps) * r ** (-a) * chip + abs(c) ** gam * (chi**gam - chi) * r ** (-gam * a)
    ham = np.abs(vp) ** gam
    res = -lap + ham - f
    scale = 1.0 + np.maximum.reduce([np.abs(f), np.abs(lap), ham])
    return float(np.max(np.abs(res) / scale))


# -- norms over the ball ---------------------------------------------------------


@dataclass(frozen=True)
class NormRow:
    eps: float
    q: float
    norm_f: float
    norm_grad_pow: float


@dataclass(frozen=True)
class NormTable:
    """Rows of (eps, q, ||f_eps||_q, || |Dv_eps|^gamma ||_q) over B_(1/2)."""

    rows: tuple
    quad_tol: float


def ball_norms(
    prof: RadialProfile, q: float, rel_tol: float = 1e-9, min_depth: int = 0
) -> tuple[float, float]:
    """(||f_eps||_q, || |Dv_eps|^gamma ||_q) on B_(1/2) by radial quadrature.

    Int_B = sigma_(d-1) Int_0^(1/2) |.|^q r^(d-1) dr, split at eps and
    2 eps to align panels with the cutoff's support edges.
    """
    if not q >= 1:
        raise DomainError(f"q must be >= 1, got {q}")
    a = prof.power
    c = prof.c
    gam = prof.gamma
    eps = prof.eps
    sigma = SPHERE_AREA[prof.d]
    chi = prof.cutoff.chi
    chip = prof.cutoff.chi_prime

    def f_integrand(r):
        t = r / eps
        fval = (c / eps) * r ** (-a) * float(chip(t)) + abs(c) ** gam * (
            float(chi(t)) ** gam - float(chi(t))
        ) * r ** (-gam * a)
        return abs(fval) ** q * r ** (prof.d - 1)

    def grad_integrand(r):
        gp = (abs(c) * r ** (-a) * float(chi(r / eps))) ** gam
        return gp**q * r ** (prof.d - 1)

    # f is supported on [eps, 2 eps] only
    int_f = adaptive_integral(
        f_integrand, eps, min(2.0 * eps, 0.5), rel_tol=rel_tol, min_depth=min_depth
    )
    int_g = adaptive_integral(
        grad_integrand,
        eps,
        0.5,
        rel_tol=rel_tol,
        breakpoints=(2.0 * eps,),
        min_depth=min_depth,
    )
    return (sigma * int_f) ** (1.0 / q), (sigma * int_g) ** (1.0 / q)


def build_norm_table(
    gamma: float,
    d: int,
    q: float | None,
    eps_list,
    rel_tol: float = 1e-9,
    cutoff: CutoffProfile | None = None,
) -> NormTable:
    """Norm sweep over eps (descending), at q (default: the critical exponent)."""
    if q is None:
        q = critical_q(gamma, d)
    if cutoff is None:
        cutoff = CutoffProfile()
    rows = []
    for eps in sorted(set(float(e) for e in eps_list), reverse=True):
        prof = RadialProfile(gamma=gamma, d=d, eps=eps, cutoff=cutoff)
        nf, ng = ball_norms(prof, q, rel_tol=rel_tol)
        rows.append(NormRow(eps=eps, q=float(q), norm_f=nf, norm_grad_pow=ng))
    return NormTable(rows=tuple(rows), quad_tol=rel_tol)


@dataclass(frozen=True)
class DivergenceFit:
    slope: float
    intercept: float
    max_rel_residual: float


def divergence_fit(table: NormTable) -> DivergenceFit:
    """Least-squares fit of norm_grad_pow^q against ln(1/eps).

    At the critical exponent the law is affine in ln(1/eps) and the fit is
    tight; away from it the residual blows up, which the caller interprets.
    """
    rows = table.rows
    if len(rows) < 4:
        raise DomainError(f"divergence fit needs >= 4 rows, got {len(rows)}")
    qs = {row.q for row in rows}
    if len(qs) != 1:
        raise DomainError("divergence fit needs a single fixed q")
    if len({row.eps for row in rows}) < 4:
        raise DomainError("divergence fit needs >= 4 distinct eps values")
    q = rows[0].q
    x = np.array([math.log(1.0 / row.eps) for row in rows])
    y = np.array([row.norm_grad_pow**q for row in rows])
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    rel = np.abs(y - fit) / np.abs(y)
    return DivergenceFit(
        slope=float(slope), intercept=float(intercept), max_rel_residual=float(rel.max())
    )
