"""Spectral-collocation toolkit for boundary observability and boundary
control of linear elastodynamics on the cube (-1, 1)^d."""

from .config import ExperimentConfig, load_config
from .control import (
    ControlResult,
    LiftingKernels,
    build_lifting,
    control_norms,
    dense_gramian,
    gramian_apply,
    gramian_symmetry_defect,
    hum_workspace,
    solve_control,
)
from .dynamics import (
    BoundaryForcing,
    ElasticState,
    InstabilityError,
    TimeGridSpec,
    discrete_energy,
    elastic_operator,
    interior_residual,
    solve_adjoint,
    solve_controlled,
    step_adjoint,
    step_controlled,
)
from .fields import (
    FaceTrace,
    Material,
    VectorField,
    face_l2_norm_sq,
    lame_apply,
    second_normal_term,
    traction,
)
from .grid import (
    ScalarGridFn,
    TensorGrid,
    discrete_inner_product,
    grid_fn_from_callable,
    l2_norm_exact,
    norm_equivalence_report,
    tensor_grid,
)
from .legendre import (
    LglRule,
    lagrange_basis_all,
    lagrange_edge_derivatives,
    legendre_eval,
    lgl_rule,
)
from .observability import (
    MultiplierDiagnostics,
    ObservabilityReport,
    multiplier_diagnostics,
    observe_trajectory,
    random_state,
    uniform_time_threshold,
    worst_case_ratio,
)

__version__ = "0.1.0"
