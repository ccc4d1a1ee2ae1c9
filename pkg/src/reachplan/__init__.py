"""reachplan: learn reaching cost functions from demonstrations and predict
new motions toward task-space goal regions with stochastic re-planning."""

from ._backend import BACKEND
from .features import FeatureRanges, FeatureSetConfig, FeatureVector, PassiveAgent, Scene
from .ioc import IocConfig, IocDataset, WeightVector, build_dataset, learn_weights, piirl_loss
from .kinematics import (
    KinematicModel,
    clamp_to_limits,
    forward_kinematics,
    ik_seed,
    jacobian,
)
from .planner import PlannerConfig, PlanResult, baseline_weights, goalset_stomp, replan_loop
from .sampling import GoalSet, project_to_goal_set, project_to_joint_limits, sample_trajectories
from .trajectory import (
    BoundaryState,
    ControlMetric,
    Trajectory,
    make_control_metric,
    resample_uniform,
    segment_demonstration,
    smoothness_quadratic,
    trajectory_distance,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoundaryState",
    "ControlMetric",
    "FeatureRanges",
    "FeatureSetConfig",
    "FeatureVector",
    "GoalSet",
    "IocConfig",
    "IocDataset",
    "KinematicModel",
    "PassiveAgent",
    "PlanResult",
    "PlannerConfig",
    "Scene",
    "Trajectory",
    "WeightVector",
    "baseline_weights",
    "build_dataset",
    "clamp_to_limits",
    "forward_kinematics",
    "goalset_stomp",
    "ik_seed",
    "jacobian",
    "learn_weights",
    "make_control_metric",
    "piirl_loss",
    "project_to_goal_set",
    "project_to_joint_limits",
    "replan_loop",
    "resample_uniform",
    "sample_trajectories",
    "segment_demonstration",
    "smoothness_quadratic",
    "trajectory_distance",
]
