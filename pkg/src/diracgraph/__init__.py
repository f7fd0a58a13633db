"""Numerical lab for nonlinear Dirac equations on noncompact metric graphs.

Staggered finite differences for the Dirac operator with Kirchhoff-type
vertex conditions, spectral projectors, normalized Dirac and Schroedinger
solvers, minimax-level estimates and randomised inequality checks.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .graph import (  # noqa: F401
    STOCK_GRAPHS,
    Edge,
    MetricGraph,
    build_graph,
    figure_graph,
    interval_graph,
    line_graph,
    load_graph,
    star_graph,
)
from .mesh import Mesh, ScalarField, SpinorField, build_mesh, lp_integral, norm, support_measure  # noqa: F401
from .operators import (  # noqa: F401
    ConstraintBasis,
    CoreNonlinearity,
    DiracOperator,
    SchrodingerOperator,
    apply,
    assemble_dirac,
    assemble_schrodinger,
    constraint_basis,
)
from .spectral import SpectralDecomposition, c_inner, c_norm, eigendecompose, project, split  # noqa: F401
from .nlse import NlseSolution, energy_Em, richardson_lambda, scaled_energy, scaled_mass, solve_nlse  # noqa: F401
from .nlde import (  # noqa: F401
    EcEstimate,
    NldeSolution,
    SolverParams,
    J_c,
    a_priori_bound_check,
    continuation,
    estimate_ec,
    initial_guess,
    reduced_map_h,
    solve_nlde,
)
from .inequalities import (  # noqa: F401
    FieldSampler,
    InequalityReport,
    check_projector_bound,
    check_support_inequality,
    estimate_gn_constants,
)
from .sweep import SweepReport, emit_report, fit_rate, run_sweep  # noqa: F401
