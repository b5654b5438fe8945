"""mkvlab: a numerical laboratory for McKean-Vlasov particle systems.

Interacting-particle simulation with convolution-type coefficients,
randomized hypothesis checking (boundedness, Lipschitz constants,
ellipticity, Dini moduli), a one-dimensional backward-PDE transform with
gradient and norm-equivalence diagnostics, and a coupled-solution harness
that probes the Gronwall-type stability behind pathwise uniqueness.
"""

__version__ = "0.1.0"

from .backends import backend_name, compiled_available
from .errors import (
    BlowUpError,
    DomainExitError,
    EmptyMeasureError,
    KernelOverflowError,
    LadderError,
    MkvlabError,
    OracleError,
    ScenarioError,
    UnknownKernelError,
)
from .kernels import (
    Bounds,
    CoefficientValue,
    KernelSpec,
    ModulusFamily,
    builtin_kernel,
    coefficient_value,
    diffusion_functional,
    diffusion_square,
    drift_functional,
)
from .measure import EmpiricalMeasure, mean_coupling_distance, wasserstein1_1d
from .particles import (
    DifferenceTrace,
    Ensemble,
    InitialLaw,
    SolverConfig,
    TrajectoryRecord,
    simulate,
    simulate_coupled,
)
from .regularity import (
    HypothesisReport,
    ModulusTable,
    ProbePlan,
    check_hypotheses,
    dini_integral,
    ellipticity_floor,
    estimate_modulus,
)
from .scenario import Scenario, load_scenario
from .uniqueness import (
    ChaosResult,
    Perturbation,
    UniquenessReport,
    chaos_scaling,
    gronwall_fit,
    interval_iteration,
    mollify_drift,
    run_uniqueness_experiment,
)
from .zvonkin import (
    GradientField,
    GridField,
    PdeGrid,
    freeze_coefficients,
    gradient_field,
    martingale_residual,
    solve_backward_pde,
    transform_path,
    verify_norm_equivalence,
)

__all__ = [
    "__version__",
    "backend_name",
    "compiled_available",
    "MkvlabError",
    "EmptyMeasureError",
    "KernelOverflowError",
    "BlowUpError",
    "DomainExitError",
    "ScenarioError",
    "UnknownKernelError",
    "LadderError",
    "OracleError",
    "Bounds",
    "ModulusFamily",
    "KernelSpec",
    "CoefficientValue",
    "builtin_kernel",
    "drift_functional",
    "diffusion_functional",
    "diffusion_square",
    "coefficient_value",
    "EmpiricalMeasure",
    "mean_coupling_distance",
    "wasserstein1_1d",
    "InitialLaw",
    "SolverConfig",
    "Ensemble",
    "TrajectoryRecord",
    "DifferenceTrace",
    "simulate",
    "simulate_coupled",
    "ProbePlan",
    "ModulusTable",
    "HypothesisReport",
    "estimate_modulus",
    "dini_integral",
    "ellipticity_floor",
    "check_hypotheses",
    "PdeGrid",
    "GridField",
    "GradientField",
    "freeze_coefficients",
    "solve_backward_pde",
    "gradient_field",
    "transform_path",
    "verify_norm_equivalence",
    "martingale_residual",
    "Perturbation",
    "UniquenessReport",
    "ChaosResult",
    "run_uniqueness_experiment",
    "interval_iteration",
    "chaos_scaling",
    "gronwall_fit",
    "mollify_drift",
    "Scenario",
    "load_scenario",
]
