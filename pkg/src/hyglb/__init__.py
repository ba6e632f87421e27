"""Fixed-confidence best-arm identification for hybrid generalized linear bandits.

A learner adaptively mixes absolute (reward) queries on single arms with
relative (dueling) queries on arm pairs, both driven by one latent parameter
through generalized linear observation channels.  The package provides the
observation models, instances and generators, the constrained MLE, the
time-uniform ellipsoidal confidence machinery, Frank-Wolfe minimax designs
(with a cost-normalized variant), the sequential track-and-stop loop, and a
seeded experiment harness with a CLI.
"""

from ._accel import NUMBA_ENABLED, backend_name
from .errors import (
    ConstructionFailureError,
    DegenerateInstanceError,
    MleConvergenceError,
    NotIdentifiableError,
)
from .glm import GlmFamily, bernoulli_logistic, gaussian
from .problem import (
    Action,
    HybridInstance,
    InstanceView,
    best_arm_and_gaps,
    duel,
    enumerate_actions,
    gen_appendix_d_case,
    gen_basis_rotated,
    gen_main_instance,
    gaussian_toy_1d,
    reward,
)
from .estimation import MleConfig, ObservationLog, constrained_mle
from .confidence import (
    ConfidenceState,
    beta_radius,
    build_state,
    certify_best,
    ellipsoid_contains,
    info_matrix,
    lipschitz_bound,
    min_linear_over_ellipsoid,
)
from .design import (
    CostDesign,
    DesignWeights,
    FwConfig,
    appendix_d_closed_forms,
    characteristic_time,
    cost_characteristic_time,
    cost_design,
    design_matrix,
    frank_wolfe_design,
    kl_action,
    local_lb_time,
    minimax_objective,
    restricted_gap_time,
)
from .explore import AlgoConfig, RunResult, recommend, run, select_action, warmup_actions
from .harness import Environment, SweepSpec, aggregate, execute_sweep, observe

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
