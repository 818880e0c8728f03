"""Multi-bubble blow-up solutions of sinh-Poisson type equations on pierced
planar domains: ansatz construction, fixed-point correction, and a suite of
quantitative checks."""

from .coeffs import (
    BlowupConfig,
    CoefficientSet,
    ScaleParams,
    choose_scales,
    coefficient_set,
    compute_rho_i,
    constant_potential,
    solve_beta,
    solve_gamma,
)
from .corrector import (
    SolveReport,
    Solution,
    construct_solution,
    continuation_sweep,
    fixed_point_correct,
    newton_correct,
)
from .geometry import (
    DomainSpec,
    Mesh,
    MeshPolicy,
    PierceSpec,
    PiercedDomain,
    annulus,
    build_mesh,
    build_pierced_domain,
)
from .greens import GreenProvider
from .operators import (
    Field,
    LinearOperator,
    discrete_laplacian,
    nonlinear_N,
    norms,
    residual_R,
    solve_L,
    solve_dirichlet,
    weight_W,
)
from .bubbles import (
    Bubble,
    assemble_U,
    bubble_value,
    build_ansatz,
    build_test_functions,
    kernel_Y,
    make_bubbles,
    project_asymptotic,
    project_numeric,
)
from .potentials import PotentialExpr, parse_potential
from .runconfig import RunConfig, parse_config

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
