"""Two-phase conductivity shape inversion on planar domains.

Boundary-integral forward transmission solvers, the Kohn-Vogelius criterion
with exact first- and second-order shape derivatives, Newton-type inclusion
reconstruction, and shape-Hessian spectrum analysis.
"""

__version__ = "0.1.0"

from .errors import (
    CapacityDegeneracyError,
    ConfigError,
    DegenerateShapeError,
    DisjointBoundariesError,
    IllConditionedSystemError,
    InadmissibleStepError,
    IncompatibleDataError,
    LineSearchError,
    MarginViolationError,
    NearSingularEvaluationError,
    NotCriticalError,
    SingularEvaluationError,
    ToolkitError,
)
from .geometry import (
    Curve,
    DeformationField,
    ShapeParams,
    boundary_integral,
    build_curve,
    circle,
    curve_from_points,
    laplace_beltrami,
    normal_derivatives,
    radial_field,
    tangential_divergence,
    tangential_gradient,
    translation_field,
)
from .potential import (
    LayerOperator,
    assemble_double_layer,
    assemble_single_layer,
    harmonic_eval,
    harmonic_gradient,
    newtonian_kernel,
    normal_kernel,
)
from .optimizer import (
    BasisSpec,
    IterationRecord,
    ReconstructionConfig,
    RunHistory,
    assemble_gradient_and_hessian,
    lm_direction,
    radial_deviation,
    reconstruct,
    update_shape,
)
from .shape_calculus import (
    DerivativeBundle,
    StateBundle,
    energy_jump_normal_derivative,
    first_order_jumps,
    kv_gradient,
    kv_hessian,
    kv_value,
    make_state_bundle,
    second_order_jumps,
    solve_state_derivative,
    state_derivatives,
)
from .spectral import (
    SpectrumReport,
    fourier_normal_basis,
    hessian_at_critical,
    hessian_from_bundle,
    spectrum_report,
)
from .transmission import (
    JumpData,
    TransmissionSolution,
    TransmissionSolver,
    solve_dirichlet,
    solve_neumann,
    solve_states,
)
from .cli_io import (
    CheckResult,
    Measurements,
    RunConfig,
    emit_report,
    forward_traces,
    parse_config,
    synth_measurements,
    verify_suite,
)

__all__ = [name for name in dir() if not name.startswith("_")]
