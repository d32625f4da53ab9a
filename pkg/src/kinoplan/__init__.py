"""Homotopy-aware timed-trajectory planning among moving obstacles."""

from .costmap import Bounds, CostGrid, build_costmap, query_cost, segment_is_free, to_pgm
from .geometry import (
    KinodynamicLimits,
    MotionModel,
    ObstacleState,
    TimedState,
    Trajectory,
    Vec2,
    arc_length,
    curvature_at,
)
from .homotopy import (
    HomotopySignature,
    SeedPath,
    enumerate_seed_paths,
    signatures_equivalent,
    winding_signature,
)
from .optimizer import (
    CostWeights,
    DensityParams,
    DensityReport,
    OptimizationError,
    OptimizeReport,
    adapt_density,
    cost_gradient,
    dynamic_weights,
    optimize_candidate,
    total_cost,
    trajectory_density,
)
from .planner import (
    CandidateInfo,
    PlanFailure,
    PlanResult,
    Scenario,
    SimTrace,
    TickRecord,
    plan_once,
    select_best,
    simulate_run,
)
from .tracking import (
    Detection,
    KalmanConfig,
    KalmanTrack,
    classify_motion,
    kf_init,
    kf_predict,
    kf_update,
    obstacle_at,
    predict_position,
    track_to_obstacle,
)

__version__ = "0.1.0"

__all__ = [
    "Bounds",
    "CandidateInfo",
    "CostGrid",
    "CostWeights",
    "DensityParams",
    "DensityReport",
    "Detection",
    "HomotopySignature",
    "KalmanConfig",
    "KalmanTrack",
    "KinodynamicLimits",
    "MotionModel",
    "ObstacleState",
    "OptimizationError",
    "OptimizeReport",
    "PlanFailure",
    "PlanResult",
    "Scenario",
    "SeedPath",
    "SimTrace",
    "TickRecord",
    "TimedState",
    "Trajectory",
    "Vec2",
    "adapt_density",
    "arc_length",
    "build_costmap",
    "classify_motion",
    "cost_gradient",
    "curvature_at",
    "dynamic_weights",
    "enumerate_seed_paths",
    "kf_init",
    "kf_predict",
    "kf_update",
    "obstacle_at",
    "optimize_candidate",
    "plan_once",
    "predict_position",
    "query_cost",
    "segment_is_free",
    "select_best",
    "signatures_equivalent",
    "simulate_run",
    "to_pgm",
    "total_cost",
    "track_to_obstacle",
    "trajectory_density",
    "winding_signature",
]
