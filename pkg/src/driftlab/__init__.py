"""Numerical laboratory for diffusing orbits in a pendulum x rotor system.

The pipeline mirrors the construction it implements: `model` fixes the
Lagrangian and separatrix, `integrator` checks trajectories, `melnikov`
certifies the splitting condition, `variational` minimises the discrete
action for single loops, `transition` glues loop pairs across a junction,
and `diffusion` chains transitions into an orbit whose rotor velocity
climbs the frequency ladder in time ~ mu^-2.
"""

from .config import ExperimentConfig, config_hash
from .diffusion import (
    DiffusionReport,
    ScalingRow,
    ScalingStudy,
    build_diffusing_orbit,
    half_kick,
    measure_td,
    plan_chain,
    plateau_deviation,
    scaling_study,
    shooting_consistency,
)
from .errors import (
    ChainAborted,
    Condition1Violated,
    ConfigError,
    DriftLabError,
    IntegrationError,
    MinimumOnBoundary,
    QuadratureError,
    SolverDidNotConverge,
)
from .integrator import Trajectory, integrate, pendulum_energy, rotor_energy
from .melnikov import (
    OMEGA_BAND,
    BoxPolicy,
    Condition1Certificate,
    MelnikovField,
    certify_at,
    certify_condition1,
    melnikov_field,
    melnikov_value,
)
from .model import (
    PerturbationSpec,
    PhasePoint,
    SystemParams,
    TrigTerm,
    eom_rhs,
    lagrangian,
    separatrix_angle,
    separatrix_state,
    separatrix_velocity,
)
from .transition import (
    JunctionBox,
    ProjectionGap,
    TransitionRecord,
    boundary_half_integrals,
    find_transition,
    glue_action,
    glued_curve,
    project_to_loop_family,
    projection_gap,
    translate_box,
)
from .variational import (
    ActionParts,
    BoundarySpec,
    DiscreteCurve,
    LoopProfile,
    SolveInfo,
    action,
    action_gradient,
    initial_guess,
    loop_mesh,
    loop_profile,
    minimize_curve,
    residual_norms,
    solve_loop,
)

__version__ = "0.1.0"

__all__ = [
    "ActionParts",
    "BoundarySpec",
    "BoxPolicy",
    "ChainAborted",
    "Condition1Certificate",
    "Condition1Violated",
    "ConfigError",
    "DiffusionReport",
    "DiscreteCurve",
    "DriftLabError",
    "ExperimentConfig",
    "IntegrationError",
    "JunctionBox",
    "LoopProfile",
    "MelnikovField",
    "MinimumOnBoundary",
    "OMEGA_BAND",
    "PerturbationSpec",
    "PhasePoint",
    "ProjectionGap",
    "QuadratureError",
    "ScalingRow",
    "ScalingStudy",
    "SolveInfo",
    "SolverDidNotConverge",
    "SystemParams",
    "Trajectory",
    "TransitionRecord",
    "TrigTerm",
    "action",
    "action_gradient",
    "boundary_half_integrals",
    "build_diffusing_orbit",
    "certify_at",
    "certify_condition1",
    "config_hash",
    "eom_rhs",
    "find_transition",
    "glue_action",
    "glued_curve",
    "half_kick",
    "initial_guess",
    "integrate",
    "lagrangian",
    "loop_mesh",
    "loop_profile",
    "measure_td",
    "melnikov_field",
    "melnikov_value",
    "minimize_curve",
    "pendulum_energy",
    "plan_chain",
    "plateau_deviation",
    "project_to_loop_family",
    "projection_gap",
    "residual_norms",
    "rotor_energy",
    "scaling_study",
    "separatrix_angle",
    "separatrix_state",
    "separatrix_velocity",
    "shooting_consistency",
    "solve_loop",
    "translate_box",
]
