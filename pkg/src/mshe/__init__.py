"""Projected modified Swift-Hohenberg gradient flow on the unit L2 sphere.

Fields live in the sine basis of (0, length) with Navier boundary conditions.
The package integrates the constrained flow, finds and classifies
equilibria, and fits decay laws and Lojasiewicz exponents to trajectories.
"""

from .analysis import (
    attractor_sweep,
    estimate_lojasiewicz,
    fit_decay,
    lojasiewicz_from_series,
    random_unit_field,
    verify_convergence,
)
from .dynamics import (
    FlowParams,
    SchemeConfig,
    Trajectory,
    energy,
    energy_gradient,
    integrate,
    residual_M,
    rhs,
    rhs_projected,
    step,
)
from .errors import (
    AssemblyError,
    ConfigError,
    ConvergenceError,
    DegenerateError,
    DivergenceError,
    DomainMismatchError,
    EstimationError,
    MSHEError,
    NonFiniteError,
)
from .field import (
    Domain,
    DomainSpec,
    Field,
    apply_A,
    apply_biharmonic,
    apply_laplacian,
    build_domain,
    inner_product_l2,
    seminorms,
    transform,
)
from .manifold import ManifoldState, project_tangent, renormalize, tangency_defect
from .stationary import (
    Equilibrium,
    LinearizedOperator,
    StabilityReport,
    assemble_linearization,
    find_equilibrium,
    spectrum,
)

__version__ = "0.1.0"
