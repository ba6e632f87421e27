"""Cumulative negative log-likelihood over the hybrid log and the constrained MLE.

The loss at parameter theta is

    L(theta) = sum_s (b_m(x_s' theta) - z_s * x_s' theta) / zeta_m,

summed over all recorded queries.  Records that share an action share a
feature vector, so the loss, its derivatives and the information matrix
depend on the log only through per-action sufficient statistics; the
ObservationLog maintains those incrementally and every evaluation is O(|A|).

The MLE is the minimizer of L over the centered ball of radius S (projected
gradient descent with a Barzilai-Borwein initial step and Armijo halving;
projection is a radial rescale).  Rank-deficient logs have non-unique
minimizers; all contracts are on the loss value and the projected-gradient
residual, never on the point.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, glm
from .errors import MleConvergenceError
from .problem import Action, InstanceView, duel, reward


@dataclass(frozen=True)
class LogRecord:
    round: int
    action: Action
    z: float


class ObservationLog:
    """Append-only, time-ordered record of (action, observation) pairs.

    Bound to an InstanceView so observations are support-checked on append
    and per-action sufficient statistics stay current.
    """

    def __init__(self, view: InstanceView):
        self.view = view
        self.records: list[LogRecord] = []
        n = view.n_actions
        self.counts = np.zeros(n)
        self.z_sum = np.zeros(n)
        self.z_abs_sum = np.zeros(n)
        self.count_reward = 0
        self.count_dueling = 0

    def __len__(self) -> int:
        return len(self.records)

    def append(self, action: Action, z: float) -> None:
        idx = self.view.action_index(action)
        fam = self.view.family_of(action)
        z = float(z)
        if fam.family_id == glm.BERNOULLI_LOGISTIC and z not in (0.0, 1.0):
            raise ValueError(f"observation {z} outside support of {fam.family_id}")
        if not np.isfinite(z):
            raise ValueError("observation must be finite")
        self.records.append(LogRecord(len(self.records) + 1, action, z))
        self.counts[idx] += 1.0
        self.z_sum[idx] += z
        self.z_abs_sum[idx] += abs(z)
        if action.is_duel:
            self.count_dueling += 1
        else:
            self.count_reward += 1

    def total_cost(self) -> float:
        return float(self.counts @ self.view.action_costs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "action_kind", "i", "j", "k", "z"])
        for rec in self.records:
            a = rec.action
            if a.is_duel:
                w.writerow([rec.round, "duel", "", a.i, a.j, repr(rec.z)])
            else:
                w.writerow([rec.round, "reward", a.i, "", "", repr(rec.z)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, view: InstanceView, text: str) -> "ObservationLog":
        log = cls(view)
        rows = list(csv.reader(io.StringIO(text)))
        for row in rows[1:]:
            if not row:
                continue
            _, kind, i, j, k, z = row
            action = reward(int(i)) if kind == "reward" else duel(int(j), int(k))
            log.append(action, float(z))
        return log


@dataclass
class MleConfig:
    max_iterations: int = 5000
    gradient_tolerance: float = 1e-8
    initial_point: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


def cumulative_loss(log: ObservationLog, view: InstanceView, theta) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    return float(
        _kernels.loss_value(
            view.feats, view.kind_codes, view.zeta, log.counts, log.z_sum, theta
        )
    )


def loss_gradient(log: ObservationLog, view: InstanceView, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    return _kernels.loss_gradient(
        view.feats, view.kind_codes, view.zeta, log.counts, log.z_sum, theta
    )


def loss_hessian(log: ObservationLog, view: InstanceView, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    return _kernels.weighted_info(
        view.feats, view.kind_codes, view.zeta, log.counts, theta
    )


def constrained_mle(
    log: ObservationLog, view: InstanceView, config: MleConfig | None = None
) -> np.ndarray:
    """Minimize the cumulative loss over the ball of radius view.S.

    Raises MleConvergenceError (carrying the best iterate) when the
    projected-gradient residual does not reach the tolerance.
    """
    if len(log) == 0:
        raise ValueError("cannot fit the MLE on an empty log")
    config = config or MleConfig()
    theta0 = (
        np.zeros(view.d)
        if config.initial_point is None
        else np.asarray(config.initial_point, dtype=np.float64)
    )
    if np.linalg.norm(theta0) > view.S + 1e-9:
        raise ValueError("initial_point must lie in the parameter ball")
    theta, residual, iterations = _kernels.mle_solve(
        view.feats,
        view.kind_codes,
        view.zeta,
        log.counts,
        log.z_sum,
        view.S,
        theta0,
        config.gradient_tolerance,
        config.max_iterations,
    )
    if residual > config.gradient_tolerance:
        raise MleConvergenceError(theta, float(residual), int(iterations))
    return theta
