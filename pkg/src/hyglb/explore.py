"""Sequential identification: warm-up, design tracking, and the stopping loop.

One run proceeds in rounds.  After a warm-up that round-robins a spanning
subset of the mode's actions until the information matrix is invertible, each
round recomputes the constrained MLE on everything observed so far, checks
whether the empirical best arm is certified optimal against every competitor
over the current confidence ellipsoid, and if not solves the mode's design at
the plug-in estimate and plays the most under-sampled action relative to its
cumulative target mass.  A vanishing fraction epsilon_t = t^(-alpha) of
rounds instead samples uniformly from the spanning subset, which keeps the
information matrix growing in every direction.

Modes: ``hybrid`` (full action space), ``reward_only`` / ``dueling_only``
(design and queries restricted to one modality), ``random_hybrid`` (uniform
queries, no design), and ``cost_aware`` (tracks the cost-normalized design;
identical to hybrid under uniform costs, including the realized action
sequence on matched seeds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .confidence import beta_radius, lipschitz_bound
from .design import FwConfig, cost_design, frank_wolfe_design
from .errors import NotIdentifiableError
from .estimation import MleConfig, ObservationLog
from .problem import InstanceView

MODES = ("hybrid", "reward_only", "dueling_only", "random_hybrid", "cost_aware")

WARMUP_EIG_FLOOR = 1e-8


@dataclass
class RefreshSchedule:
    """Per-round warm-started design refresh with periodic full solves."""

    warm_iterations: int = 50
    full_iterations: int = 2000
    full_every: int = 50
    warm_step_offset: int = 100  # FW step index offset for warm refreshes


@dataclass
class AlgoConfig:
    delta: float
    alpha: float = 0.5
    mode: str = "hybrid"
    max_rounds: int = 5_000_000
    refresh: RefreshSchedule = field(default_factory=RefreshSchedule)
    mle: MleConfig = field(default_factory=MleConfig)
    fw: FwConfig = field(default_factory=FwConfig)
    collect_trace: bool = False
    keep_log: bool = False

    def __post_init__(self):
        if not 0.0 < self.delta < 0.5:
            raise ValueError(f"delta must be in (0, 0.5), got {self.delta}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")


@dataclass
class TrackingState:
    """Tracking-rule bookkeeping over the mode's allowed actions (local idx)."""

    pull_counts_tracking: np.ndarray
    target_mass: np.ndarray
    tracking_rounds: int
    exploration_support: np.ndarray
    alpha: float


@dataclass
class RunResult:
    tau: int
    recommended: int
    correct: bool
    converged: bool
    total_cost: float
    reward_cost: float
    dueling_cost: float
    n_reward: int
    n_dueling: int
    warmup_rounds: int
    final_theta: np.ndarray
    trace: list | None = None
    log: ObservationLog | None = None


def allowed_actions(view: InstanceView, mode: str) -> np.ndarray:
    if mode == "reward_only":
        return np.arange(view.K)
    if mode == "dueling_only":
        return np.arange(view.K, view.n_actions)
    return np.arange(view.n_actions)


def warmup_actions(view: InstanceView, mode: str) -> list[int]:
    """Greedy spanning subset of the mode's actions, in canonical order.

    Raises NotIdentifiableError when the mode's features do not span R^d
    (e.g. dueling-only on two arms in the plane).
    """
    candidates = allowed_actions(view, mode)
    chosen: list[int] = []
    basis = np.zeros((0, view.d))
    for idx in candidates:
        x = view.feats[idx]
        if basis.shape[0] == 0:
            resid = x
        else:
            resid = x - basis.T @ (basis @ x)
        norm = np.linalg.norm(resid)
        if norm > 1e-10:
            basis = np.vstack([basis, resid / norm])
            chosen.append(int(idx))
        if basis.shape[0] == view.d:
            break
    if basis.shape[0] < view.d:
        raise NotIdentifiableError(
            f"{mode} actions span only {basis.shape[0]} of {view.d} dimensions"
        )
    return chosen


def recommend(theta_hat, view: InstanceView) -> int:
    """argmax_i x_i' theta_hat, smallest index on ties.  Depends on theta_hat
    only through arm scores, so any component orthogonal to all pairwise
    differences shifts every score equally and leaves the choice unchanged."""
    scores = view.arms @ np.asarray(theta_hat, dtype=np.float64)
    return int(np.argmax(scores))


def select_action(
    state: TrackingState,
    w_star: np.ndarray,
    t: int,
    rng: np.random.Generator,
    epsilon: float | None = None,
):
    """One draw of the tracking rule at global round t.

    Returns (local action index, was_tracking).  With probability
    epsilon_t = t^(-alpha) the action is uniform on the exploration support
    and the tracking state must not be updated; otherwise it is the argmin of
    pull count minus cumulative target mass (ties to the smallest index) and
    the caller adds w_star to the target mass and increments the pull count.
    """
    eps = float(t) ** (-state.alpha) if epsilon is None else epsilon
    if eps > 0.0 and rng.random() < eps:
        pick = state.exploration_support[
            rng.integers(len(state.exploration_support))
        ]
        return int(pick), False
    deficit = state.pull_counts_tracking - state.target_mass
    return int(np.argmin(deficit)), True


def _fsum_costs(log: ObservationLog, view: InstanceView):
    """Exactly-rounded cost totals split by modality (order independent)."""
    costs = view.action_costs
    reward_terms = []
    duel_terms = []
    for rec in log.records:
        c = costs[view.action_index(rec.action)]
        (duel_terms if rec.action.is_duel else reward_terms).append(c)
    return math.fsum(reward_terms), math.fsum(duel_terms)


def run(env, config: AlgoConfig, rng: np.random.Generator) -> RunResult:
    """Execute one seeded run against an environment.

    ``env`` must expose ``view`` (an InstanceView), ``observe(action)`` and,
    for the post-hoc correctness flag, ``best_arm()``.
    """
    view: InstanceView = env.view
    mode = config.mode
    allowed = allowed_actions(view, mode)
    warm_list = warmup_actions(view, mode)
    log = ObservationLog(view)
    theta = np.zeros(view.d)

    costs = view.action_costs
    support_local = np.array([int(np.where(allowed == a)[0][0]) for a in warm_list])

    def mle_step(theta_warm):
        out, _, _ = _kernels.mle_solve(
            view.feats,
            view.kind_codes,
            view.zeta,
            log.counts,
            log.z_sum,
            view.S,
            theta_warm,
            config.mle.gradient_tolerance,
            config.mle.max_iterations,
        )
        return out

    def info_at(theta_now):
        return _kernels.weighted_info(
            view.feats, view.kind_codes, view.kappa_den, log.counts, theta_now
        )

    # Warm-up: round-robin the spanning subset until A_t is invertible.
    pos = 0
    while len(log) < config.max_rounds:
        a_idx = warm_list[pos % len(warm_list)]
        pos += 1
        z = env.observe(view.actions[a_idx])
        log.append(view.actions[a_idx], z)
        theta = mle_step(theta)
        eigs = np.linalg.eigvalsh(info_at(theta))
        if eigs[0] > WARMUP_EIG_FLOOR:
            break
    warmup_rounds = len(log)

    tracking = TrackingState(
        pull_counts_tracking=np.zeros(len(allowed)),
        target_mass=np.zeros(len(allowed)),
        tracking_rounds=0,
        exploration_support=support_local,
        alpha=config.alpha,
    )
    design_warm: np.ndarray | None = None  # FW variable over `allowed`
    design_calls = 0
    trace: list | None = [] if config.collect_trace else None
    recommended = recommend(theta, view)
    converged = False

    while True:
        t = len(log) + 1
        theta = mle_step(theta)
        lip = lipschitz_bound(log, view)
        beta = beta_radius(lip, view.d, view.S, config.delta)
        i_hat = recommend(theta, view)
        others = [j for j in range(view.K) if j != i_hat]
        dirs = np.ascontiguousarray(view.arms[i_hat] - view.arms[others])
        identified, vals = _kernels.certificate_values(
            info_at(theta), theta, dirs, beta
        )
        min_cert = float(vals.min()) if identified else -math.inf
        if identified and min_cert > 0.0:
            recommended = i_hat
            converged = True
            break
        if len(log) >= config.max_rounds:
            recommended = i_hat
            break

        phi = math.nan
        if mode == "random_hybrid":
            a_local = int(rng.integers(len(allowed)))
            was_tracking = False
        else:
            full = design_warm is None or design_calls % config.refresh.full_every == 0
            design_calls += 1
            fw_cfg = replace(
                config.fw,
                max_iterations=(
                    config.refresh.full_iterations
                    if full
                    else config.refresh.warm_iterations
                ),
            )
            k0 = 0 if full else config.refresh.warm_step_offset
            if mode == "cost_aware":
                res = cost_design(
                    theta,
                    i_hat,
                    view,
                    costs,
                    fw_cfg,
                    warm_start=design_warm,
                    allowed=allowed,
                )
                w_tracked = res.tracking.weights[allowed]
                # warm start lives in the substituted simplex variable q = c*p
                design_warm = (costs * res.design.intensities)[allowed]
                phi = res.phi
            else:
                res = frank_wolfe_design(
                    theta,
                    i_hat,
                    view,
                    fw_cfg,
                    warm_start=design_warm,
                    allowed=allowed,
                    k0=k0,
                )
                w_sub = res.weights[allowed]
                w_tracked = w_sub / w_sub.sum()
                design_warm = w_sub
                phi = res.phi
            a_local, was_tracking = select_action(tracking, w_tracked, t, rng)
            if was_tracking:
                tracking.target_mass += w_tracked
                tracking.pull_counts_tracking[a_local] += 1.0
                tracking.tracking_rounds += 1

        a_idx = int(allowed[a_local])
        action = view.actions[a_idx]
        z = env.observe(action)
        log.append(action, z)
        if trace is not None:
            trace.append(
                {
                    "t": t,
                    "action": str(action),
                    "z": z,
                    "was_tracking": was_tracking,
                    "beta": beta,
                    "min_certificate_value": min_cert,
                    "phi": phi,
                }
            )

    reward_cost, dueling_cost = _fsum_costs(log, view)
    return RunResult(
        tau=len(log),
        recommended=recommended,
        correct=bool(recommended == env.best_arm()),
        converged=converged,
        total_cost=reward_cost + dueling_cost,
        reward_cost=reward_cost,
        dueling_cost=dueling_cost,
        n_reward=log.count_reward,
        n_dueling=log.count_dueling,
        warmup_rounds=warmup_rounds,
        final_theta=theta,
        trace=trace,
        log=log if config.keep_log else None,
    )
