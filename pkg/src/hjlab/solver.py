"""Classical periodic solutions of -Lap(u) + H(Du) + lambda = f.

A generic source f does not satisfy the compatibility condition that
integrating the equation over the torus forces, so the solver computes the
ergodic pair (u, lambda) with mean(u) = 0: lambda is the unique additive
constant making the problem solvable, and all downstream norm reports use
f - lambda as the effective source.

The solve has two phases.  Semi-implicit relaxation evolves
u_t = Lap(u) - H(Du) + f (Laplacian implicit through its Fourier
multiplier, Hamiltonian explicit with dealiased evaluation), re-centering
u each step; it stops at `relax_tol`, on stall, or at the step cap.
Newton then iterates on the augmented system

    F(u, lambda) = ( -Lap(u) + H(Du) + lambda - f,  mean(u) )

with the Jacobian applied matrix-free and inner solves by preconditioned
GMRES ((-Lap + I)^-1 in Fourier space).  The fixed point of both phases is
the same discrete system, so Newton inherits the relaxation seed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .backend import kernels
from .errors import (
    ConfigError,
    DivergenceError,
    DomainError,
    EvaluationError,
    NewtonStagnationError,
)
from .torus import (
    ScalarField,
    SpectrumWorkspace,
    pad_spectrum,
    require_same_grid,
    truncate_spectrum,
)

_STALL_WINDOW = 150  # relaxation steps without a 0.5% improvement => stall
_DAMPING = (1.0, 0.5, 0.25, 0.125)  # full step, then three damped attempts


@dataclass(frozen=True)
class Perturbation:
    """Bounded pointwise addition b(p) to the Hamiltonian, |b| <= bound.

    `func` maps a list of gradient-component arrays to b(p) values;
    `grad_dot` (needed for Newton) maps (p components, v components) to
    grad b(p) . v.
    """

    func: Callable[[Sequence[np.ndarray]], np.ndarray]
    bound: float
    grad_dot: Callable[[Sequence[np.ndarray], Sequence[np.ndarray]], np.ndarray] | None = None


@dataclass(frozen=True)
class Hamiltonian:
    """H(p) = c1 |p|^gamma + b(p) with gamma > 1, c1 > 0, b optional and bounded."""

    gamma: float
    c1: float = 1.0
    perturbation: Perturbation | None = None

    def __post_init__(self):
        if not self.gamma > 1:
            raise DomainError(f"gamma must exceed 1, got {self.gamma}")
        if not self.c1 > 0:
            raise DomainError(f"c1 must be positive, got {self.c1}")

    @property
    def pure_power(self) -> bool:
        return self.perturbation is None

    def value(self, comps: Sequence[np.ndarray]) -> np.ndarray:
        """H at the nodes, from gradient components."""
        stack = np.ascontiguousarray(np.stack([c.ravel() for c in comps]))
        s = np.asarray(kernels.grad_norm_sq(stack))
        out = np.asarray(kernels.ham_power(s, self.gamma, self.c1))
        out = out.reshape(comps[0].shape)
        if self.perturbation is not None:
            out = out + self.perturbation.func(list(comps))
        return out

    def jac_dot(self, comps: Sequence[np.ndarray], vcomps: Sequence[np.ndarray]) -> np.ndarray:
        """DH(p) . v at the nodes (DH extended by zero at p = 0)."""
        stack = np.ascontiguousarray(np.stack([c.ravel() for c in comps]))
        s = np.asarray(kernels.grad_norm_sq(stack))
        scale = np.asarray(kernels.dh_scale(s, self.gamma, self.c1)).reshape(comps[0].shape)
        dot = comps[0] * vcomps[0]
        for j in range(1, len(comps)):
            dot = dot + comps[j] * vcomps[j]
        out = scale * dot
        if self.perturbation is not None:
            if self.perturbation.grad_dot is None:
                raise DomainError(
                    "Newton refinement needs grad_dot on the Hamiltonian perturbation"
                )
            out = out + self.perturbation.grad_dot(list(comps), list(vcomps))
        return out

    def validate_bound(self, d: int, samples: int = 160) -> None:
        """Assert sup|b| <= bound by sampling gradient vectors over many scales."""
        if self.perturbation is None:
            return
        rng = np.random.Generator(np.random.PCG64(0x48AB))
        radii = np.logspace(-3, 3, samples)
        dirs = rng.standard_normal((samples, d))
        dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
        comps = [np.ascontiguousarray(radii * dirs[:, j]) for j in range(d)]
        vals = np.asarray(self.perturbation.func(comps))
        worst = float(np.abs(vals).max())
        if worst > self.perturbation.bound * (1 + 1e-9) + 1e-12:
            raise DomainError(
                f"perturbation exceeds its declared bound: |b| reaches {worst:.6g} "
                f"> c2 = {self.perturbation.bound:.6g}"
            )


@dataclass(frozen=True)
class ErgodicProblem:
    """Source f, Hamiltonian H, and the Lebesgue exponent q under study."""

    f: ScalarField
    H: Hamiltonian
    q: float

    def __post_init__(self):
        if not self.q >= 1:
            raise DomainError(f"Lebesgue exponent must satisfy q >= 1, got {self.q}")
        self.H.validate_bound(self.f.grid.d)

    @property
    def critical_q(self) -> float:
        d, g = self.f.grid.d, self.H.gamma
        return d * (g - 1) / g

    def admissibility(self) -> dict:
        """Recorded flags; solving is permitted even when inadmissible."""
        return {
            "q_above_critical": bool(self.q > self.critical_q),
            "q_above_two": bool(self.q > 2),
        }

    @property
    def admissible(self) -> bool:
        flags = self.admissibility()
        return flags["q_above_critical"] and flags["q_above_two"]


@dataclass(frozen=True)
class SolveSettings:
    """Relaxation/Newton controls.  relax_dt = None picks 0.25 h / (1 + max|f|)."""

    relax_dt: float | None = None
    relax_tol: float = 1e-4
    newton_tol: float = 1e-10
    linear_tol: float = 1e-12
    max_relax_steps: int = 4000
    max_newton_steps: int = 12

    def __post_init__(self):
        for name in ("relax_tol", "newton_tol", "linear_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.relax_dt is not None and not self.relax_dt > 0:
            raise ConfigError("relax_dt must be positive")
        for name in ("max_relax_steps", "max_newton_steps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return {
            "relax_dt": self.relax_dt,
            "relax_tol": self.relax_tol,
            "newton_tol": self.newton_tol,
            "linear_tol": self.linear_tol,
            "max_relax_steps": self.max_relax_steps,
            "max_newton_steps": self.max_newton_steps,
        }


@dataclass(frozen=True)
class ErgodicSolution:
    """Mean-zero solution, ergodic constant, and convergence diagnostics."""

    u: ScalarField
    lam: float
    residual_inf: float
    residual_l2: float
    relax_steps: int
    newton_steps: int
    converged: bool


class _Operator:
    """Dealiased discrete operator bundle for one problem on one workspace."""

    def __init__(self, prob: ErgodicProblem, ws: SpectrumWorkspace):
        require_same_grid(ws, prob.f)
        self.prob = prob
        self.ws = ws
        self.grid = ws.grid
        self.fhat = ws.fft(prob.f.values)
        self.fmean = prob.f.mean()
        self.n_nodes = self.grid.node_count

    def fine_gradient(self, uhat: np.ndarray) -> list[np.ndarray]:
        ws = self.ws
        return [
            ws.fine.ifft_real(pad_spectrum(g * uhat), what="oversampled gradient")
            for g in ws.grad_mult
        ]

    def ham_spectrum(self, uhat: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Dealiased spectrum of H(Du), plus the cached fine-grid gradient."""
        comps = self.fine_gradient(uhat)
        hvals = self.prob.H.value(comps)
        if not np.all(np.isfinite(hvals)):
            raise EvaluationError("Hamiltonian overflowed to a non-finite value")
        return truncate_spectrum(self.ws.fine.fft(hvals)), comps

    def lam_estimate(self, ham_hat: np.ndarray) -> float:
        return self.fmean - float(ham_hat.flat[0].real) / self.n_nodes

    def residual_values(self, uhat: np.ndarray, lam: float, ham_hat=None) -> np.ndarray:
        # combine in physical space: each inverse transform is checked
        # against its own scale (the residual itself nearly cancels)
        if ham_hat is None:
            ham_hat, _ = self.ham_spectrum(uhat)
        lap_vals = self.ws.ifft_real(self.ws.lap_mult * uhat, what="laplacian")
        ham_vals = self.ws.ifft_real(ham_hat, what="hamiltonian")
        return -lap_vals + ham_vals + lam - self.prob.f.values


def _norms(grid, rvals) -> tuple[float, float]:
    rinf = float(np.abs(rvals).max())
    rl2 = float(
        (grid.h**grid.d * kernels.abs_pow_sum(np.ascontiguousarray(rvals.ravel()), 2.0))
        ** 0.5
    )
    return rinf, rl2


def _solution(grid, uvals, lam, rvals, relax_steps, newton_steps, newton_tol) -> ErgodicSolution:
    uvals = uvals - uvals.mean()
    rinf, rl2 = _norms(grid, rvals)
    return ErgodicSolution(
        u=ScalarField(grid, uvals),
        lam=float(lam),
        residual_inf=rinf,
        residual_l2=rl2,
        relax_steps=relax_steps,
        newton_steps=newton_steps,
        converged=bool(rinf <= newton_tol),
    )


def default_relax_dt(prob: ErgodicProblem, ws: SpectrumWorkspace) -> float:
    return 0.25 * ws.grid.h / (1.0 + prob.f.max_abs())


def relax_to_steady(
    prob: ErgodicProblem, settings: SolveSettings, ws: SpectrumWorkspace
) -> ErgodicSolution:
    """Semi-implicit pseudo-time march toward the steady ergodic system."""
    op = _Operator(prob, ws)
    dt = settings.relax_dt if settings.relax_dt is not None else default_relax_dt(prob, ws)
    denom = 1.0 - dt * ws.lap_mult  # lap_mult <= 0, so denom >= 1
    uhat = np.zeros(ws.grid.shape, dtype=complex)

    best = np.inf
    best_state = None
    best_step = 0
    steps_done = 0
    for step in range(settings.max_relax_steps + 1):
        try:
            ham_hat, _ = op.ham_spectrum(uhat)
            lam = op.lam_estimate(ham_hat)
            rvals = op.residual_values(uhat, lam, ham_hat)
        except EvaluationError as exc:
            raise DivergenceError(
                f"relaxation blew up at step {step} (dt = {dt:.3e}); "
                f"try a smaller relax_dt [{exc}]",
                step=step,
            ) from exc
        rinf = float(np.abs(rvals).max())
        if not np.isfinite(rinf):
            raise DivergenceError(
                f"relaxation blew up at step {step} (dt = {dt:.3e}); "
                "try a smaller relax_dt",
                step=step,
            )
        steps_done = step
        if rinf < 0.995 * best or best_state is None:
            if rinf < best:
                best = rinf
                best_state = (uhat.copy(), lam, rvals)
                best_step = step
        if rinf <= settings.relax_tol:
            break
        if step - best_step >= _STALL_WINDOW:
            break  # stalled; hand the best iterate to Newton
        if step == settings.max_relax_steps:
            break
        uhat = (uhat + dt * (op.fhat - ham_hat)) / denom
        uhat.flat[0] = 0.0  # re-center; the removed drift lives in lambda

    uhat, lam, rvals = best_state
    uvals = ws.ifft_real(uhat, what="relaxed solution")
    return _solution(ws.grid, uvals, lam, rvals, steps_done, 0, settings.newton_tol)


def newton_refine(
    seed: ErgodicSolution,
    prob: ErgodicProblem,
    settings: SolveSettings,
    ws: SpectrumWorkspace,
) -> ErgodicSolution:
    """Newton iteration on the augmented system, matrix-free GMRES inside."""
    op = _Operator(prob, ws)
    require_same_grid(ws, seed.u)
    grid = ws.grid
    n = grid.node_count
    shape = grid.shape

    u = seed.u.values.copy()
    lam = seed.lam
    if not np.isfinite(seed.residual_inf):
        raise DomainError("seed residual is not finite")

    uhat = ws.fft(u)
    ham_hat, comps = op.ham_spectrum(uhat)
    rvals = op.residual_values(uhat, lam, ham_hat)
    rinf = float(np.abs(rvals).max())
    if rinf <= settings.newton_tol:
        return _solution(
            grid, u, lam, rvals, seed.relax_steps, 0, settings.newton_tol
        )

    inv_precond = 1.0 / (1.0 - ws.lap_mult)

    def make_operator(fine_comps):
        def matvec(x):
            v = x[:n].reshape(shape)
            mu = x[n]
            vhat = ws.fft(v)
            vcomps = [
                ws.fine.ifft_real(pad_spectrum(g * vhat), what="Jacobian gradient")
                for g in ws.grad_mult
            ]
            prod = prob.H.jac_dot(fine_comps, vcomps)
            phat = truncate_spectrum(ws.fine.fft(prod))
            out_u = ws.ifft_real(-ws.lap_mult * vhat + phat, what="Jacobian action") + mu
            return np.concatenate([out_u.ravel(), [float(v.mean())]])

        def psolve(x):
            v = x[:n].reshape(shape)
            smoothed = ws.ifft_real(ws.fft(v) * inv_precond, what="preconditioner")
            return np.concatenate([smoothed.ravel(), [x[n]]])

        A = LinearOperator((n + 1, n + 1), matvec=matvec, dtype=float)
        M = LinearOperator((n + 1, n + 1), matvec=psolve, dtype=float)
        return A, M

    newton_steps = 0
    for _ in range(settings.max_newton_steps):
        A, M = make_operator(comps)
        b = -np.concatenate([rvals.ravel(), [float(u.mean())]])
        delta, info = gmres(
            A, b, M=M, rtol=settings.linear_tol, atol=0.0, restart=100, maxiter=3
        )
        du = delta[:n].reshape(shape)
        dlam = float(delta[n])

        accepted = False
        for s in _DAMPING:
            u_try = u + s * du
            u_try = u_try - u_try.mean()
            lam_try = lam + s * dlam
            uhat_try = ws.fft(u_try)
            ham_try, comps_try = op.ham_spectrum(uhat_try)
            rvals_try = op.residual_values(uhat_try, lam_try, ham_try)
            rinf_try = float(np.abs(rvals_try).max())
            if np.isfinite(rinf_try) and rinf_try < rinf:
                u, lam, rvals, rinf = u_try, lam_try, rvals_try, rinf_try
                comps = comps_try
                accepted = True
                newton_steps += 1
                break
        if not accepted:
            raise NewtonStagnationError(
                f"Newton stagnated: no residual decrease over {len(_DAMPING) - 1} "
                f"damped attempts (residual_inf = {rinf:.3e})",
                best=_solution(
                    grid, u, lam, rvals, seed.relax_steps, newton_steps, settings.newton_tol
                ),
            )
        if rinf <= settings.newton_tol:
            return _solution(
                grid, u, lam, rvals, seed.relax_steps, newton_steps, settings.newton_tol
            )

    raise NewtonStagnationError(
        f"Newton did not reach newton_tol = {settings.newton_tol:.1e} within "
        f"{settings.max_newton_steps} steps (residual_inf = {rinf:.3e})",
        best=_solution(
            grid, u, lam, rvals, seed.relax_steps, newton_steps, settings.newton_tol
        ),
    )


def solve(
    prob: ErgodicProblem, settings: SolveSettings, ws: SpectrumWorkspace
) -> ErgodicSolution:
    """Relaxation followed by Newton refinement; always returns diagnostics.

    Raises DivergenceError when relaxation blows up; Newton stagnation is
    folded into the returned solution with converged = False.
    """
    seed = relax_to_steady(prob, settings, ws)
    try:
        return newton_refine(seed, prob, settings, ws)
    except NewtonStagnationError as exc:
        return exc.best if exc.best is not None else seed


def residual_field(
    sol: ErgodicSolution, prob: ErgodicProblem, ws: SpectrumWorkspace
) -> ScalarField:
    """-Lap(u) + H(Du) + lambda - f with dealiased Hamiltonian evaluation."""
    op = _Operator(prob, ws)
    require_same_grid(ws, sol.u)
    rvals = op.residual_values(ws.fft(sol.u.values), sol.lam)
    return ScalarField(ws.grid, rvals)


def integral_identity_check(
    sol: ErgodicSolution, prob: ErgodicProblem, ws: SpectrumWorkspace | None = None
) -> float:
    """|mean(H(Du)) + lambda - mean(f)|: zero for the continuum equation.

    Integrating the equation over the torus kills the Laplacian by
    periodicity, so the conserved quantity must vanish to solver accuracy.
    """
    if ws is None:
        ws = SpectrumWorkspace(sol.u.grid)
    op = _Operator(prob, ws)
    ham_hat, _ = op.ham_spectrum(ws.fft(sol.u.values))
    hmean = float(ham_hat.flat[0].real) / op.n_nodes
    return abs(hmean + sol.lam - op.fmean)


def hopf_cole_residual(
    sol: ErgodicSolution, prob: ErgodicProblem, ws: SpectrumWorkspace
) -> float:
    """Linear-equation residual of v = exp(-u): ||Lap v - (f - lam) v||_inf / ||v||_inf.

    Valid only for the pure quadratic Hamiltonian (gamma = 2, c1 = 1), for
    which the substitution linearizes the equation exactly.
    """
    H = prob.H
    if H.gamma != 2 or H.c1 != 1 or not H.pure_power:
        raise DomainError(
            "Hopf-Cole check requires the pure power Hamiltonian with gamma = 2, c1 = 1"
        )
    require_same_grid(ws, sol.u, prob.f)
    v = np.exp(-sol.u.values)
    lap_v = ws.ifft_real(ws.lap_mult * ws.fft(v), what="Hopf-Cole Laplacian")
    resid = lap_v - (prob.f.values - sol.lam) * v
    return float(np.abs(resid).max() / np.abs(v).max())
