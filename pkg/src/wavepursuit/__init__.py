"""Pursuit-evasion planning on dynamic potential fields.

A pursuer steers down a potential that is either quasi-stationary (relaxed to
steady state every tick), diffusive, or a damped wave; the wave variant feeds
the field's time derivative back into the guidance law, which is what lets it
anticipate a moving target instead of trailing it.
"""

__version__ = "0.1.0"

from . import errors
from .errors import (
    DegenerateNormal,
    DisconnectedFreeSpace,
    FieldKindMismatch,
    MissingPreviousStep,
    NoConvergence,
    NonPositiveCellSize,
    NotBoundaryCell,
    OutOfBounds,
    OutOfDomain,
    ParseError,
    QueryInObstacle,
    ScenarioInvalid,
    SchemaMismatch,
    ShapeOutOfBounds,
    SingularGradient,
    SolverFailure,
    TargetInsideObstacle,
    UnstableTimeStep,
    ValidationError,
    WavePursuitError,
)
from .environment import (
    CellClass,
    Circle,
    Environment,
    EnvironmentSpec,
    Rect,
    build_environment,
)
from .fields import (
    BoundaryMode,
    FieldKind,
    PotentialField,
    TargetFootprint,
    cfl_max_dt,
    diffusion_max_dt,
    make_time_field,
    occupancy_field,
    reset_for_target,
    solve_laplace,
    step_diffusion,
    step_wave,
)
from .guidance import (
    GuidanceCommand,
    RegularizerParams,
    guidance_raw,
    guidance_regularized,
    normalize_command,
    sample_gradient,
    sample_potential,
    sample_time_derivative,
)
from .agents import (
    AgentState,
    EvaderFieldConfig,
    PathKind,
    RandomEvaderParams,
    ScriptedPath,
    StrategyTag,
)
from .engine import (
    CaptureReport,
    EvaderConfig,
    FieldConfig,
    GameTrace,
    PursuerConfig,
    Scenario,
    check_capture,
    run_game,
    scenario_digest,
)
from .analysis import (
    AvoidanceReport,
    CriticalPoint,
    CriticalPointReport,
    CurvatureReport,
    LyapunovReport,
    avoidance_margin_check,
    boundary_probe,
    curvature_closure_correlation,
    lyapunov_check,
    maximum_principle_check,
    morse_check,
)

__all__ = [
    "__version__",
    "errors",
    "DegenerateNormal",
    "DisconnectedFreeSpace",
    "FieldKindMismatch",
    "MissingPreviousStep",
    "NoConvergence",
    "NonPositiveCellSize",
    "NotBoundaryCell",
    "OutOfBounds",
    "OutOfDomain",
    "ParseError",
    "QueryInObstacle",
    "ScenarioInvalid",
    "SchemaMismatch",
    "ShapeOutOfBounds",
    "SingularGradient",
    "SolverFailure",
    "TargetInsideObstacle",
    "UnstableTimeStep",
    "ValidationError",
    "WavePursuitError",
    "CellClass",
    "Circle",
    "Environment",
    "EnvironmentSpec",
    "Rect",
    "build_environment",
    "BoundaryMode",
    "FieldKind",
    "PotentialField",
    "TargetFootprint",
    "cfl_max_dt",
    "diffusion_max_dt",
    "make_time_field",
    "occupancy_field",
    "reset_for_target",
    "solve_laplace",
    "step_diffusion",
    "step_wave",
    "GuidanceCommand",
    "RegularizerParams",
    "guidance_raw",
    "guidance_regularized",
    "normalize_command",
    "sample_gradient",
    "sample_potential",
    "sample_time_derivative",
    "AgentState",
    "EvaderFieldConfig",
    "PathKind",
    "RandomEvaderParams",
    "ScriptedPath",
    "StrategyTag",
    "CaptureReport",
    "EvaderConfig",
    "FieldConfig",
    "GameTrace",
    "PursuerConfig",
    "Scenario",
    "check_capture",
    "run_game",
    "scenario_digest",
    "AvoidanceReport",
    "CriticalPoint",
    "CriticalPointReport",
    "CurvatureReport",
    "LyapunovReport",
    "avoidance_margin_check",
    "boundary_probe",
    "curvature_closure_correlation",
    "lyapunov_check",
    "maximum_principle_check",
    "morse_check",
]
