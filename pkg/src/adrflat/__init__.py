"""Robust flatness-based tracking control with higher-order disturbance observers.

Library layout:

* ``polynomials`` / ``statespace`` -- linear-algebra and polynomial core
* ``observer`` -- k-th order disturbance observer
* ``flat_brunovsky`` / ``flat_polymatrix`` -- the two reference generators
* ``controller`` -- variant dispatch, state reconstruction, certificates
* ``plant`` / ``references`` / ``simulate`` -- benchmark plant and runner
* ``scenario`` / ``cli`` / ``acceptance`` -- file format, CLI, verification
"""

from .controller import (
    ControlLaw,
    ControllerSpec,
    FlatMachinery,
    UltimateBound,
    build_flat_machinery,
    certify_ultimate_bound,
    make_controller,
    reconstruct_xi,
)
from .errors import (
    AdrflatError,
    DimensionMismatch,
    EmptyWindow,
    InsufficientDerivatives,
    NotControllable,
    NotHurwitz,
    QTooSmall,
    ScenarioError,
    SingularChannel,
    StepTooLarge,
    UnstableRun,
    UnsupportedDimension,
)
from .flat_brunovsky import (
    BrunovskyFlatPlan,
    TransformedDisturbanceStack,
    brunovsky_control,
    brunovsky_state_reference,
    structural_zero_rows,
    transform_disturbances,
)
from .flat_polymatrix import (
    FlatParameterization,
    PolyModel,
    build_flat_parameterization,
    compute_q_polynomials,
    left_annihilator_2x1,
    polymatrix_control,
    polymatrix_references,
    solve_parameterization,
    two_mass_poly_model,
)
from .observer import (
    BoundParams,
    DisturbanceEstimates,
    ObserverConfig,
    ObserverState,
    assemble_psi,
    error_bound,
    extract_estimates,
    observer_derivatives,
    tune_gains_repeated,
)
from .plant import (
    DisturbanceSpec,
    NominalParams,
    PlantParams,
    build_nominal_model,
    mechanical_energy,
    true_derivative,
)
from .polynomials import Polynomial, PolyMatrix, poly_eval_derivative_chain
from .references import ConstantReference, SineReference, SmoothStepReference
from .simulate import Scenario, SimLog, compute_metrics, run_scenario, simulate_open_loop
from .statespace import (
    BrunovskyTransform,
    LyapunovCertificate,
    StateSpaceModel,
    controllability_matrix,
    lyapunov_solve,
    place_poles,
    to_brunovsky,
)

__version__ = "0.1.0"
