"""Data-assisted hybrid actor-critic approximate dynamic programming."""

from .actor import ActorState, ActorTuning, actor_error, actor_flow, actor_output
from .closed_loop import (
    ClosedLoopState,
    DiagnosticsLog,
    TargetSet,
    build_closed_loop,
    distance_to_target,
    jump_decrease_factor,
    lyapunov_full,
    lyapunov_Vc,
    simulate_closed_loop,
)
from .critic import (
    BASELINE,
    MOMENTUM,
    CriticState,
    CriticTuning,
    TuningVerdict,
    critic_flow,
    critic_jump,
    critic_value,
    grad_joint_error,
    hamiltonian_estimate,
    joint_error,
    optimal_restart_period,
    validate_tuning,
)
from .data import (
    DataSample,
    RecordedDataset,
    RichnessCertificate,
    certify_richness,
    lattice_grid,
    record_expert_grid,
)
from .features import (
    ActorRegressor,
    BasisSet,
    capital_omega,
    estimate_bounds,
    normalized_psi,
    psi,
    quadratic_monomial_basis,
)
from .hybrid import HybridArc, HybridStamp, HybridSystemSpec, IntegratorConfig, flow_step, solve_hybrid
from .plant import (
    ControlAffinePlant,
    QuadraticCost,
    ReferenceSolution,
    builtin_example_plant,
    eval_dynamics,
    eval_running_cost,
    reference_policy,
)

__version__ = "0.1.0"
