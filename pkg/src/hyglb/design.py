"""Minimax experimental design over the joint action space.

The design matrix for a weight vector w on the actions is

    A(w, theta) = sum_a w_a mu'_m(x_a' theta) / (2 (1 + S rho_a M_m) zeta_m)
                  x_a x_a',

and the objective is the worst squared confidence width over competitor
directions, phi(w) = max_{i != i_hat} ||x_ihat - x_i||^2_{A(w)^{-1}} (infinity
when A(w) is singular).  phi is convex in w, and the Frank-Wolfe vertex step
carries a computable optimality gap, so solutions are certified.

The cost-aware variant substitutes q = c * p so the cost-normalized design
(⟨c, p⟩ = 1) becomes the same simplex problem with per-action information
divided by cost.

Characteristic times divide the optimal phi by the squared minimal gap; the
local lower-bound relaxation instead uses raw Fisher weights mu'/zeta and
per-competitor gaps, and is solved with the same machinery on gap-scaled
directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, glm
from .errors import NotIdentifiableError
from .problem import Action, HybridInstance, InstanceView, best_arm_and_gaps

_TIE_REL = 1e-10


@dataclass(frozen=True)
class DesignWeights:
    """Allocation on the simplex over the full action list."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < -1e-12):
            raise ValueError("design weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"design weights must sum to 1, got {w.sum()}")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class CostDesign:
    """Cost-normalized intensities p >= 0 with <costs, p> = 1."""

    intensities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.intensities, dtype=np.float64).copy()
        if np.any(p < -1e-12):
            raise ValueError("intensities must be nonnegative")
        p.setflags(write=False)
        object.__setattr__(self, "intensities", p)

    def check_normalization(self, costs) -> None:
        total = float(np.asarray(costs) @ self.intensities)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"cost-weighted sum must be 1, got {total}")


@dataclass
class FwConfig:
    max_iterations: int = 2000
    relative_tolerance: float = 1e-6
    ridge: float = _kernels.RIDGE

    def __post_init__(self):
        if not self.relative_tolerance > 0:
            raise ValueError("relative_tolerance must be positive")
        if not 0.0 <= self.ridge <= 1e-8:
            raise ValueError("ridge must lie in [0, 1e-8]")


@dataclass
class FwResult:
    weights: np.ndarray        # full-length allocation (zeros off-support)
    support: np.ndarray        # action indices the solve ran over
    phi: float
    gap: float
    iterations: int
    converged: bool

    def sub_weights(self) -> np.ndarray:
        return self.weights[self.support]


def info_coefficients(view: InstanceView, theta, allowed=None) -> np.ndarray:
    """Per-action information weight mu'(x_a' theta) / (2 (1 + S rho M) zeta)."""
    theta = np.asarray(theta, dtype=np.float64)
    idx = np.arange(view.n_actions) if allowed is None else np.asarray(allowed)
    eta = view.feats[idx] @ theta
    mu_prime = np.empty(len(idx))
    for pos, a in enumerate(idx):
        mu_prime[pos] = _kernels.glm_mu_prime(int(view.kind_codes[a]), float(eta[pos]))
    return mu_prime / view.kappa_den[idx]


def fisher_coefficients(view: InstanceView, theta, allowed=None) -> np.ndarray:
    """Raw Fisher weights mu'(x_a' theta) / zeta, no self-concordance discount."""
    theta = np.asarray(theta, dtype=np.float64)
    idx = np.arange(view.n_actions) if allowed is None else np.asarray(allowed)
    eta = view.feats[idx] @ theta
    out = np.empty(len(idx))
    for pos, a in enumerate(idx):
        out[pos] = _kernels.glm_mu_prime(int(view.kind_codes[a]), float(eta[pos]))
    return out / view.zeta[idx]


def competitor_directions(view: InstanceView, i_hat: int) -> np.ndarray:
    """Rows x_ihat - x_j for every j != i_hat, in arm order."""
    others = [j for j in range(view.K) if j != i_hat]
    return np.ascontiguousarray(view.arms[i_hat] - view.arms[others])


def design_matrix(w, theta, view: InstanceView) -> np.ndarray:
    weights = w.weights if isinstance(w, DesignWeights) else np.asarray(w, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    return _kernels.weighted_info(
        view.feats, view.kind_codes, view.kappa_den, weights, theta
    )


def _phi_of_matrix(A: np.ndarray, dirs: np.ndarray) -> float:
    ok, vals = _kernels.inv_quad_forms(A, np.ascontiguousarray(dirs))
    if not ok:
        return math.inf
    return float(vals.max())


def minimax_objective(theta, i_hat: int, w, view: InstanceView) -> float:
    """phi(theta, w): worst competitor width, or +inf when A(w) is singular."""
    if not 0 <= i_hat < view.K:
        raise ValueError(f"i_hat {i_hat} out of range")
    A = design_matrix(w, theta, view)
    return _phi_of_matrix(A, competitor_directions(view, i_hat))


def _solve_minimax(
    feats: np.ndarray,
    coefs: np.ndarray,
    dirs: np.ndarray,
    config: FwConfig,
    warm_start: np.ndarray | None = None,
    k0: int = 0,
    subspace: bool = False,
):
    """Run Frank-Wolfe; with subspace=True the problem is projected onto the
    span of the features, provided every direction lies in that span (the
    value of a quadratic form in A^+ over its range), else phi = inf."""
    m, d = feats.shape
    if subspace:
        _, svals, vt = np.linalg.svd(feats, full_matrices=False)
        rank = int(np.sum(svals > 1e-10 * max(svals[0], 1.0))) if len(svals) else 0
        if rank == 0:
            return None
        Q = vt[:rank].T
        resid = dirs - (dirs @ Q) @ Q.T
        norms = np.linalg.norm(resid, axis=1)
        if np.any(norms > 1e-9 * (1.0 + np.linalg.norm(dirs, axis=1))):
            return None
        feats = np.ascontiguousarray(feats @ Q)
        dirs = np.ascontiguousarray(dirs @ Q)
    w0 = np.full(m, 1.0 / m) if warm_start is None else np.asarray(warm_start, float)
    w_best, phi, gap, iters, converged = _kernels.fw_minimax(
        np.ascontiguousarray(feats),
        np.ascontiguousarray(coefs),
        np.ascontiguousarray(dirs),
        w0.copy(),
        k0,
        config.max_iterations,
        config.relative_tolerance,
    )
    return w_best, float(phi), float(gap), int(iters), bool(converged)


def frank_wolfe_design(
    theta,
    i_hat: int,
    view: InstanceView,
    config: FwConfig | None = None,
    warm_start: np.ndarray | None = None,
    allowed: np.ndarray | None = None,
    k0: int = 0,
) -> FwResult:
    """Solve for the minimax allocation at the plug-in parameter.

    ``allowed`` restricts the support to a subset of action indices (used for
    the single-modality baselines); the returned weights are full-length with
    zeros off-support.  Non-convergence is flagged, never raised; the best
    iterate is returned either way.
    """
    config = config or FwConfig()
    support = (
        np.arange(view.n_actions) if allowed is None else np.asarray(allowed, int)
    )
    feats = np.ascontiguousarray(view.feats[support])
    coefs = info_coefficients(view, theta, support)
    dirs = competitor_directions(view, i_hat)
    warm = None if warm_start is None else np.asarray(warm_start, float)
    if warm is not None and warm.shape == (view.n_actions,):
        warm = warm[support]
    out = _solve_minimax(feats, coefs, dirs, config, warm, k0=k0)
    w_sub, phi, gap, iters, converged = out
    full = np.zeros(view.n_actions)
    full[support] = w_sub
    return FwResult(full, support, phi, gap, iters, converged)


@dataclass
class CostDesignResult:
    design: CostDesign            # intensities p, <c, p> = 1
    tracking: DesignWeights       # normalized allocation p / sum(p)
    phi: float
    gap: float
    iterations: int
    converged: bool


def cost_design(
    theta,
    i_hat: int,
    view: InstanceView,
    costs,
    config: FwConfig | None = None,
    warm_start: np.ndarray | None = None,
    allowed: np.ndarray | None = None,
) -> CostDesignResult:
    """Cost-normalized minimax design via the substitution q = c * p.

    q lives on the simplex and sees each action's information divided by its
    cost, so the standard solver applies unchanged; p = q / c then satisfies
    <c, p> = 1 by construction, and the tracking allocation is p / sum(p).
    """
    config = config or FwConfig()
    costs = np.asarray(costs, dtype=np.float64)
    if np.any(costs <= 0):
        raise ValueError("costs must be positive")
    support = (
        np.arange(view.n_actions) if allowed is None else np.asarray(allowed, int)
    )
    feats = np.ascontiguousarray(view.feats[support])
    coefs = info_coefficients(view, theta, support) / costs[support]
    dirs = competitor_directions(view, i_hat)
    warm = None if warm_start is None else np.asarray(warm_start, float)
    if warm is not None and warm.shape == (view.n_actions,):
        warm = warm[support]
    q_sub, phi, gap, iters, converged = _solve_minimax(
        feats, coefs, dirs, config, warm
    )
    p_sub = q_sub / costs[support]
    p = np.zeros(view.n_actions)
    p[support] = p_sub
    w_bar = np.zeros(view.n_actions)
    w_bar[support] = p_sub / p_sub.sum()
    return CostDesignResult(
        CostDesign(p), DesignWeights(w_bar), phi, gap, iters, converged
    )


def characteristic_time(
    instance: HybridInstance, config: FwConfig | None = None
) -> float:
    """T* = (min_w max_i ||x_istar - x_i||^2_{A(w, theta*)^{-1}}) / gap_min^2."""
    config = config or FwConfig()
    i_star, _, gap_min = best_arm_and_gaps(instance)
    view = instance.view()
    res = frank_wolfe_design(instance.theta_star, i_star, view, config)
    return res.phi / gap_min**2


def cost_characteristic_time(
    instance: HybridInstance, costs, config: FwConfig | None = None
) -> float:
    """Cost-aware analogue with the feasible set <c, p> = 1."""
    config = config or FwConfig()
    i_star, _, gap_min = best_arm_and_gaps(instance)
    view = instance.view()
    res = cost_design(instance.theta_star, i_star, view, costs, config)
    return res.phi / gap_min**2


def kl_action(a: Action, theta, lam, view: InstanceView) -> float:
    """Per-action KL divergence between the observation laws at theta and lam:
    (b(x'lam) - b(x'theta) - mu(x'theta) x'(lam - theta)) / zeta."""
    idx = view.action_index(a)
    x = view.feats[idx]
    kind = int(view.kind_codes[idx])
    eta_t = float(x @ np.asarray(theta, float))
    eta_l = float(x @ np.asarray(lam, float))
    return (
        _kernels.glm_b(kind, eta_l)
        - _kernels.glm_b(kind, eta_t)
        - _kernels.glm_mu(kind, eta_t) * (eta_l - eta_t)
    ) / view.zeta[idx]


def local_lb_time(instance: HybridInstance, config: FwConfig | None = None) -> float:
    """Local lower-bound relaxation: 2 min_w max_i ||g_i / gap_i||^2 in the
    inverse of the raw Fisher design matrix (no self-concordance discount)."""
    config = config or FwConfig()
    i_star, gaps, _ = best_arm_and_gaps(instance)
    view = instance.view()
    dirs = competitor_directions(view, i_star)
    others = [j for j in range(view.K) if j != i_star]
    scaled = dirs / gaps[others][:, None]
    coefs = fisher_coefficients(view, instance.theta_star)
    out = _solve_minimax(
        np.ascontiguousarray(view.feats), coefs, scaled, config, subspace=True
    )
    if out is None:
        raise NotIdentifiableError("directions leave the feature span")
    return 2.0 * out[1]


MODALITY_SUPPORTS = ("reward", "dueling", "hybrid")


def modality_support(view: InstanceView, modality: str) -> np.ndarray:
    if modality == "reward":
        return np.arange(view.K)
    if modality == "dueling":
        return np.arange(view.K, view.n_actions)
    if modality == "hybrid":
        return np.arange(view.n_actions)
    raise ValueError(f"unknown modality {modality!r}")


def restricted_gap_time(
    instance: HybridInstance, modality: str, config: FwConfig | None = None
) -> float:
    """Per-competitor-gap characteristic value on a modality-restricted
    action set: min_w max_i ||g_i||^2_{A(w, theta*)^{-1}} / gap_i^2.

    Solved in the span of the restricted features; directions inside that
    span are measured by the pseudo-inverse quadratic form (a single dueling
    pair can certify its own direction even when it cannot identify theta),
    directions outside it make the value infinite.
    """
    config = config or FwConfig()
    i_star, gaps, _ = best_arm_and_gaps(instance)
    view = instance.view()
    support = modality_support(view, modality)
    dirs = competitor_directions(view, i_star)
    others = [j for j in range(view.K) if j != i_star]
    scaled = dirs / gaps[others][:, None]
    coefs = info_coefficients(view, instance.theta_star, support)
    out = _solve_minimax(
        np.ascontiguousarray(view.feats[support]),
        coefs,
        scaled,
        config,
        subspace=True,
    )
    if out is None:
        return math.inf
    return out[1]


def appendix_d_closed_forms(case: int, B_c: float, B_d: float):
    """Closed-form reward-only and dueling-only complexity constants.

    Case 1 (arms e1, -e2, theta* = (1, 0)):
        T_R = B_c (sigma'(1)^{-1/2} + sigma'(0)^{-1/2})^2,  T_D = B_d / sigma'(1).
    Case 2 (arms e1, e2, cos(.1) e1 + sin(.1) e2; a = 1 - cos(.1), s = sin(.1)):
        T_R = B_c (a sigma'(1)^{-1/2} + s sigma'(0)^{-1/2})^2 / a^2,
        T_D = B_d / (sigma'(a) a^2);  T_R here is an upper bound on the
        restricted optimum (it uses arms 1 and 2 only).
    """
    if case not in (1, 2):
        raise ValueError(f"case must be 1 or 2, got {case}")
    if not (B_c > 0 and B_d > 0):
        raise ValueError("B_c and B_d must be positive")
    fam = glm.bernoulli_logistic()
    sp1 = glm.mean_prime(fam, 1.0)
    sp0 = glm.mean_prime(fam, 0.0)
    if case == 1:
        T_R = B_c * (sp1 ** -0.5 + sp0 ** -0.5) ** 2
        T_D = B_d / sp1
        return T_R, T_D
    a = 1.0 - math.cos(0.1)
    s = math.sin(0.1)
    T_R = B_c * (a * sp1 ** -0.5 + s * sp0 ** -0.5) ** 2 / a**2
    T_D = B_d / (glm.mean_prime(fam, a) * a**2)
    return T_R, T_D


def design_report(
    instance: HybridInstance, costs=None, config: FwConfig | None = None
) -> dict:
    """Full design diagnostics for the CLI: the hybrid allocation and phi,
    both characteristic times, the local relaxation, and the per-gap
    modality-restricted values."""
    config = config or FwConfig()
    i_star, _, gap_min = best_arm_and_gaps(instance)
    view = instance.view()
    res = frank_wolfe_design(instance.theta_star, i_star, view, config)
    costs_arr = view.action_costs if costs is None else np.asarray(costs, float)
    cost_res = cost_design(instance.theta_star, i_star, view, costs_arr, config)
    report = {
        "i_star": i_star,
        "gap_min": gap_min,
        "w": list(map(float, res.weights)),
        "phi": res.phi,
        "fw_iterations": res.iterations,
        "converged": res.converged,
        "T_star": res.phi / gap_min**2,
        "p": list(map(float, cost_res.design.intensities)),
        "w_bar": list(map(float, cost_res.tracking.weights)),
        "T_star_cost": cost_res.phi / gap_min**2,
        "cost_converged": cost_res.converged,
        "T_loc": local_lb_time(instance, config),
        "T_gap_reward_only": restricted_gap_time(instance, "reward", config),
        "T_gap_dueling_only": restricted_gap_time(instance, "dueling", config),
    }
    return report
