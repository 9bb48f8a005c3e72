"""Robust adaptive-horizon MPC for uncertain linear systems.

The toolkit covers the full pipeline: H-polytope geometry and invariant
sets, net-additive uncertainty bounding, disturbance-feedback predictions,
a certified LP/QP solve layer, the adaptive-horizon robust controller, a
conservative lumped baseline, closed-loop simulation with stability
monitors, grid-sampled ROA estimation and timing benchmarks, plus a CLI.
"""
from . import baseline, controller, geometry, prediction, qpsolver, simulator, system
from .baseline import BaselineConfig, BaselineController, baseline_solve, make_baseline_config
from .controller import (
    AdaptiveController,
    MPCConfig,
    MPCSolution,
    TerminalComponents,
    adaptive_solve,
    build_case1,
    build_caseN,
    candidate_tail_cost,
    config_from_problem,
    mpc_step,
    rollout_policy,
    synthesize_terminal,
)
from .geometry import (
    Polytope,
    PointCloudHull2D,
    hull_2d,
    is_subset,
    max_robust_invariant,
    pre_set,
    remove_redundant,
    support,
)
from .prediction import FeedbackGainStack, StackedDynamics, build_stacked, policy_input
from .system import (
    NetAdditiveBound,
    ProblemDefinition,
    UncertainSystem,
    UncertaintyRealization,
    default_problem_path,
    load_problem,
    net_additive_bound,
    sample_realization,
)

__version__ = "0.1.0"
