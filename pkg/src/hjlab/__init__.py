"""hjlab: a pseudospectral laboratory for maximal Lq-regularity experiments
on the periodic viscous Hamilton-Jacobi equation -Lap(u) + |Du|^gamma = f.

The package solves the ergodic form of the equation on the unit torus,
measures the superlevel-set machinery behind the a priori estimate
(exponent algebra, pointwise inequalities, the integration-by-parts
identity, the Y_k functional and its empirical modulus), and evaluates
the explicit radial family that breaks the estimate at the critical
exponent q = d (gamma - 1)/gamma.

Hot kernels live in a compiled extension with a numpy fallback selected
at import time (see `hjlab.backend`); `benchmarks/bench_kernels.py`
compares the two.
"""

__version__ = "0.1.0"

from .backend import COMPILED
from .bernstein import (
    AuditReport,
    Exponents,
    OmegaEnvelope,
    RegularityReport,
    SuperlevelCurve,
    alternative_roots,
    default_k_grid,
    derive_exponents,
    f_alternative,
    g_eval,
    ibp_identity_residual,
    k_star,
    omega_envelope,
    pointwise_audit,
    regularity_report,
    superlevel_curve,
)
from .config import KGridSpec, RunConfig, config_from_dict, load_config
from .counterexample import (
    CutoffProfile,
    NormTable,
    RadialProfile,
    ball_norms,
    build_norm_table,
    c_constant,
    critical_q,
    divergence_fit,
    profile_eval,
    radial_residual,
)
from .ensemble import generate_source, manufactured_field, manufactured_problem
from .fieldio import read_field, write_field
from .solver import (
    ErgodicProblem,
    ErgodicSolution,
    Hamiltonian,
    Perturbation,
    SolveSettings,
    hopf_cole_residual,
    integral_identity_check,
    newton_refine,
    relax_to_steady,
    residual_field,
    solve,
)
from .torus import (
    GridSpec,
    HessianField,
    ScalarField,
    SpectrumWorkspace,
    VectorField,
    gradient,
    hessian,
    laplacian,
    lq_norm,
    nonlinear_eval,
    superlevel_measure,
)

__all__ = [name for name in dir() if not name.startswith("_")]
