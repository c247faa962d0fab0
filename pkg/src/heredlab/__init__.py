"""heredlab: linear viscoelastic hereditary operators.

Certification of fading memory and contractivity, causal solvers for the
stress-control problem, optimal finite-rank reductions of the history
operator, and relaxation-spectrum tools.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DivergenceError,
    DomainError,
    HeredlabError,
    InvalidMeasureError,
    InvalidWeightError,
    NonConvergenceError,
    NotContractiveError,
)
from .material import (
    ComplexModulus,
    DecoupledLaw,
    ElasticModuli,
    IsotropicKernel,
    IsotropicMaterial,
    IsotropicModuli,
    PronyMode,
    ScalarKernel,
    ScalarMaterial,
    Weight,
    complex_modulus,
    eval_kernel,
    kernel_operator_norm,
    mode_decouple,
    relaxation_modulus,
)
from .wellposed import Certificate, certify, check_semigroup, gamma, hs_constant, max_decay_rate
from .volterra import (
    Evolution,
    SolveReport,
    TimeGrid,
    apply_P,
    cycle_work,
    solve_direct,
    solve_picard,
    stress_from_strain,
    weighted_norm,
)
from .history import (
    DiscreteHistoryOperator,
    HistoryGrid,
    LaguerreBasis,
    RankNOperator,
    SingularSystem,
    assemble_S,
    project_history,
    reconstruct,
    singular_system,
    sls_eigen_ode_oracle,
    sls_eigen_reference,
    truncate,
)
from .spectra import (
    RelaxationMeasure,
    TabulatedDensity,
    class_membership,
    class_nwidth,
    kernel_distance,
    kernel_from_measure,
    prony_from_density,
    sls_class_integrals,
)
from .cards import load_material, material_from_dict, material_to_dict
