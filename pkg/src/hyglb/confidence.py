"""Time-uniform confidence machinery: radius, information matrix, ellipsoid.

The confidence radius is the exact infimum of

    beta = log(1/delta) + inf_{c in (0, 1]} (d log(1/c) + 2 S L c),

where L is a realized upper bound on the Lipschitz modulus of the cumulative
loss over the parameter ball: each record contributes
rho_a (|z| + mu_bar_a) / zeta_a, with mu_bar_a the sup of |mu| over the
action's natural-parameter range.  With the discounted information matrix

    A_t = sum_s mu'_m(x_s' theta_hat) / (2 (1 + S rho_s M_m) zeta_m) x_s x_s'

the set { theta : ||theta - theta_hat||_{A_t}^2 <= beta } contains the true
parameter at every round simultaneously with probability at least 1 - delta,
which is what the stopping certificate consumes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NotIdentifiableError
from .estimation import ObservationLog
from .problem import InstanceView

#: smallest eigenvalue below which the information matrix is treated as
#: singular and stopping cannot fire
SINGULAR_EIG = _kernels.SING_EIG_FLOOR


@dataclass(frozen=True)
class ConfidenceState:
    """Snapshot (theta_hat, A_t, beta, L) defining the current ellipsoid."""

    theta_hat: np.ndarray
    info_matrix: np.ndarray
    beta: float
    lipschitz_L: float


def lipschitz_bound(log: ObservationLog, view: InstanceView) -> float:
    """Realized bound on sup ||grad L|| over the ball; 0 for an empty log.

    Per-record gradient norm is at most ||x_a|| (|z| + |mu|) / zeta <=
    rho_a (|z| + mu_bar_a) / zeta_a, so the sum over records dominates the
    modulus surely and is nondecreasing in t.
    """
    per_action = view.rho * (log.z_abs_sum + log.counts * view.mu_bar) / view.zeta
    return float(per_action.sum())


def beta_radius(lipschitz_L: float, d: int, S: float, delta: float) -> float:
    """Exact infimum of the radius over the free parameter c in (0, 1].

    The minimizer is c = d / (2 S L) when that lies in (0, 1], giving
    log(1/delta) + d (1 + log(2 S L / d)); otherwise the boundary c = 1
    gives log(1/delta) + 2 S L.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if lipschitz_L < 0:
        raise ValueError("lipschitz_L must be nonnegative")
    base = math.log(1.0 / delta)
    twoSL = 2.0 * S * lipschitz_L
    if twoSL >= d:
        return base + d * (1.0 + math.log(twoSL / d))
    return base + twoSL


def info_matrix(log: ObservationLog, view: InstanceView, theta_hat) -> np.ndarray:
    """Aggregated information matrix A_t evaluated at theta_hat."""
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    return _kernels.weighted_info(
        view.feats, view.kind_codes, view.kappa_den, log.counts, theta_hat
    )


def build_state(
    log: ObservationLog, view: InstanceView, theta_hat, delta: float
) -> ConfidenceState:
    L = lipschitz_bound(log, view)
    return ConfidenceState(
        theta_hat=np.asarray(theta_hat, dtype=np.float64),
        info_matrix=info_matrix(log, view, theta_hat),
        beta=beta_radius(L, view.d, view.S, delta),
        lipschitz_L=L,
    )


def min_linear_over_ellipsoid(state: ConfidenceState, g) -> float:
    """Exact minimum of g' theta over the ellipsoid:
    g' theta_hat - sqrt(beta) * ||g||_{A^{-1}} (Lagrangian closed form)."""
    g = np.asarray(g, dtype=np.float64)
    ok, vals = _kernels.certificate_values(
        state.info_matrix, state.theta_hat, g[None, :], state.beta
    )
    if not ok:
        raise NotIdentifiableError(
            "information matrix is singular; ellipsoid is unbounded"
        )
    return float(vals[0])


def certify_best(state: ConfidenceState, view: InstanceView, candidate: int) -> bool:
    """True iff every competitor direction has a strictly positive minimum
    over the ellipsoid.  A singular information matrix certifies nothing."""
    if not 0 <= candidate < view.K:
        raise ValueError(f"candidate arm {candidate} out of range")
    others = [i for i in range(view.K) if i != candidate]
    dirs = view.arms[candidate] - view.arms[others]
    ok, vals = _kernels.certificate_values(
        state.info_matrix, state.theta_hat, np.ascontiguousarray(dirs), state.beta
    )
    if not ok:
        return False
    return bool(np.all(vals > 0.0))


def ellipsoid_contains(state: ConfidenceState, theta) -> bool:
    """Closed-set membership: (theta - theta_hat)' A (theta - theta_hat) <= beta."""
    diff = np.asarray(theta, dtype=np.float64) - state.theta_hat
    return float(diff @ state.info_matrix @ diff) <= state.beta


def state_to_json(state: ConfidenceState) -> str:
    """Debug dump of the snapshot."""
    eigs = np.linalg.eigvalsh(state.info_matrix)
    return json.dumps(
        {
            "theta_hat": list(map(float, state.theta_hat)),
            "beta": state.beta,
            "lipschitz_L": state.lipschitz_L,
            "info_eigenvalues": list(map(float, eigs)),
        },
        indent=2,
    )
