"""Hybrid bandit instances: arms, the joint action space, and generators.

An instance has K arms with feature vectors in the unit ball of R^d and a
hidden parameter theta_star with ||theta_star|| <= S.  The joint action space
is the K reward queries followed by the K(K-1)/2 dueling queries in
lexicographic (j, k) order, j < k.  A dueling query observes the channel at
the difference feature x_j - x_k.

Arm and action indices are 0-based throughout the package (including CSV and
JSON output).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import glm
from .errors import ConstructionFailureError, DegenerateInstanceError

REWARD = "reward"
DUEL = "duel"

#: numeric tolerances for instance degeneracy checks
SPAN_TOL = 1e-10
GAP_TOL = 1e-10


@dataclass(frozen=True, order=True)
class Action:
    """A reward query on arm ``i`` (j == -1) or a duel on the pair (i, j), i < j."""

    kind: str
    i: int
    j: int = -1

    def __post_init__(self):
        if self.kind == REWARD:
            if self.i < 0 or self.j != -1:
                raise ValueError(f"malformed reward action {self}")
        elif self.kind == DUEL:
            if not 0 <= self.i < self.j:
                raise ValueError(f"duel indices must satisfy 0 <= j < k, got {self}")
        else:
            raise ValueError(f"unknown action kind {self.kind!r}")

    @property
    def is_duel(self) -> bool:
        return self.kind == DUEL

    @property
    def rho(self) -> int:
        """Feature norm budget: 1 for reward actions, 2 for duels."""
        return 2 if self.is_duel else 1

    def __str__(self):
        if self.is_duel:
            return f"duel({self.i},{self.j})"
        return f"reward({self.i})"


def reward(i: int) -> Action:
    return Action(REWARD, int(i))


def duel(j: int, k: int) -> Action:
    return Action(DUEL, int(j), int(k))


def enumerate_actions(K: int) -> list[Action]:
    """All K + K(K-1)/2 actions: rewards first, then duels in lex (j, k) order."""
    if K < 2:
        raise ValueError(f"need at least 2 arms, got K={K}")
    actions = [reward(i) for i in range(K)]
    for j in range(K):
        for k in range(j + 1, K):
            actions.append(duel(j, k))
    return actions


class InstanceView:
    """Algorithm-facing view of an instance: everything except theta_star.

    Also precomputes the per-action arrays consumed by the numeric kernels.
    """

    def __init__(self, arms, S, family_reward, family_dueling, action_costs):
        self.arms = np.asarray(arms, dtype=np.float64)
        self.arms.setflags(write=False)
        self.S = float(S)
        self.family_reward = family_reward
        self.family_dueling = family_dueling
        self.K, self.d = self.arms.shape
        self.actions = tuple(enumerate_actions(self.K))
        n = len(self.actions)

        feats = np.empty((n, self.d))
        kind = np.empty(n, dtype=np.int64)
        zeta = np.empty(n)
        rho = np.empty(n)
        kappa_den = np.empty(n)
        mu_bar = np.empty(n)
        for idx, a in enumerate(self.actions):
            fam = family_dueling if a.is_duel else family_reward
            feats[idx] = (
                self.arms[a.i] - self.arms[a.j] if a.is_duel else self.arms[a.i]
            )
            kind[idx] = fam.code
            zeta[idx] = fam.dispersion_scale
            rho[idx] = a.rho
            kappa_den[idx] = (
                2.0 * (1.0 + self.S * a.rho * fam.sc_constant) * fam.dispersion_scale
            )
            mu_bar[idx] = glm.mean_abs_bound(fam, a.rho * self.S)

        if action_costs is None:
            costs = np.ones(n)
        else:
            costs = np.asarray(action_costs, dtype=np.float64).copy()
            if costs.shape != (n,):
                raise ValueError(f"expected {n} action costs, got {costs.shape}")
        if not np.all(costs > 0):
            raise ValueError("action costs must be positive")

        for arr in (feats, kind, zeta, rho, kappa_den, mu_bar, costs):
            arr.setflags(write=False)
        self.feats = feats
        self.kind_codes = kind
        self.zeta = zeta
        self.rho = rho
        self.kappa_den = kappa_den
        self.mu_bar = mu_bar
        self.action_costs = costs
        self._index = {a: idx for idx, a in enumerate(self.actions)}

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action_index(self, a: Action) -> int:
        try:
            return self._index[a]
        except KeyError:
            raise ValueError(f"action {a} is not valid for K={self.K}") from None

    def family_of(self, a: Action) -> glm.GlmFamily:
        return self.family_dueling if a.is_duel else self.family_reward


@dataclass(frozen=True)
class HybridInstance:
    """Full instance including the hidden parameter (environment/oracle side)."""

    arms: np.ndarray
    theta_star: np.ndarray
    radius_S: float
    family_reward: glm.GlmFamily
    family_dueling: glm.GlmFamily
    action_costs: np.ndarray | None = None
    generator: str = field(default="custom")

    def __post_init__(self):
        arms = np.asarray(self.arms, dtype=np.float64)
        theta = np.asarray(self.theta_star, dtype=np.float64)
        if arms.ndim != 2:
            raise ValueError("arms must be a (K, d) array")
        K, d = arms.shape
        if K < 2:
            raise ValueError("need at least 2 arms")
        if theta.shape != (d,):
            raise ValueError("theta_star dimension mismatch")
        if not self.radius_S > 0:
            raise ValueError("radius_S must be positive")
        if np.linalg.norm(theta) > self.radius_S + 1e-9:
            raise ValueError("||theta_star|| exceeds radius_S")
        norms = np.linalg.norm(arms, axis=1)
        if np.any(norms > 1.0 + 1e-9):
            raise ValueError(f"arm feature norms must be <= 1, max is {norms.max()}")
        if np.linalg.svd(arms, compute_uv=False)[-1] <= SPAN_TOL:
            raise DegenerateInstanceError("arm features do not span R^d")
        scores = arms @ theta
        order = np.sort(scores)
        if order[-1] - order[-2] <= GAP_TOL:
            raise DegenerateInstanceError("best arm is not unique")
        costs = self.action_costs
        if costs is not None:
            costs = np.asarray(costs, dtype=np.float64).copy()
            n = K + K * (K - 1) // 2
            if costs.shape != (n,):
                raise ValueError(f"expected {n} action costs, got {costs.shape}")
            if not np.all(costs > 0):
                raise ValueError("action costs must be positive")
            costs.setflags(write=False)
        arms = arms.copy()
        theta = theta.copy()
        arms.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "action_costs", costs)

    @property
    def K(self) -> int:
        return self.arms.shape[0]

    @property
    def d(self) -> int:
        return self.arms.shape[1]

    def view(self) -> InstanceView:
        return InstanceView(
            self.arms,
            self.radius_S,
            self.family_reward,
            self.family_dueling,
            self.action_costs,
        )

    def with_costs(self, cost_reward: float, cost_dueling: float) -> "HybridInstance":
        """Same instance with per-modality costs applied to every action."""
        n_pairs = self.K * (self.K - 1) // 2
        costs = np.concatenate(
            [np.full(self.K, float(cost_reward)), np.full(n_pairs, float(cost_dueling))]
        )
        return HybridInstance(
            self.arms,
            self.theta_star,
            self.radius_S,
            self.family_reward,
            self.family_dueling,
            costs,
            generator=self.generator,
        )


def action_feature(view, a: Action) -> np.ndarray:
    """x_i for reward(i), x_j - x_k for duel(j, k)."""
    arms = view.arms
    K = arms.shape[0]
    if a.is_duel:
        if not a.j < K:
            raise ValueError(f"arm index out of range in {a}")
        return arms[a.i] - arms[a.j]
    if not a.i < K:
        raise ValueError(f"arm index out of range in {a}")
    return arms[a.i].copy()


def best_arm_and_gaps(instance: HybridInstance):
    """Oracle: (i_star, gaps, gap_min) with gaps[i] = (x_istar - x_i)' theta_star."""
    scores = instance.arms @ instance.theta_star
    i_star = int(np.argmax(scores))
    order = np.sort(scores)
    if order[-1] - order[-2] <= GAP_TOL:
        raise DegenerateInstanceError("best arm is not unique")
    gaps = scores[i_star] - scores
    gap_min = float(np.min(gaps[np.arange(len(gaps)) != i_star]))
    return i_star, gaps, gap_min


def _unit_orthogonal(direction: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vector in the orthogonal complement of ``direction``."""
    d = direction.shape[0]
    if d < 2:
        raise ConstructionFailureError("no orthogonal complement in dimension 1")
    for _ in range(64):
        v = rng.standard_normal(d)
        v -= (v @ direction) * direction
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            return v / norm
    raise ConstructionFailureError("failed to draw an orthogonal direction")


def gen_main_instance(
    K: int, d: int, S: float, rng: np.random.Generator
) -> HybridInstance:
    """Random-arm construction with prescribed alignments along theta_star.

    theta_star = (S-1) * ones / sqrt(d); arm 0 has alignment 0.9, arm i >= 1
    has alignment 0.8 * (K-1-i) / (K-1); the component orthogonal to
    theta_star is a uniform random direction scaled so every arm has norm
    exactly 1.  Both feedback channels are logistic.
    """
    if K < 2 or d < 2:
        raise ConstructionFailureError("gen_main_instance needs K >= 2 and d >= 2")
    if not S > 1:
        raise ConstructionFailureError("gen_main_instance needs S > 1")
    theta = (S - 1.0) * np.ones(d) / math.sqrt(d)
    unit = theta / np.linalg.norm(theta)
    aligns = np.empty(K)
    aligns[0] = 0.9
    for i in range(1, K):
        aligns[i] = 0.8 * (K - 1 - i) / (K - 1)
    if np.any(np.abs(aligns) > 1.0):
        raise ConstructionFailureError("alignment coefficient exceeds unit norm")
    arms = np.empty((K, d))
    for i in range(K):
        ortho = _unit_orthogonal(unit, rng)
        arms[i] = aligns[i] * unit + math.sqrt(max(0.0, 1.0 - aligns[i] ** 2)) * ortho
    return HybridInstance(
        arms,
        theta,
        float(S),
        glm.bernoulli_logistic(),
        glm.bernoulli_logistic(),
        generator="main",
    )


def gen_basis_rotated(d: int, S: float) -> HybridInstance:
    """Basis arms e_1..e_d plus the rotated arm cos(0.1) e_1 + sin(0.1) e_2.

    Uses the same theta_star rule as gen_main_instance.  Deterministic.
    """
    if d < 2:
        raise ConstructionFailureError("gen_basis_rotated needs d >= 2")
    if not S > 1:
        raise ConstructionFailureError("gen_basis_rotated needs S > 1")
    arms = np.vstack([np.eye(d), np.zeros(d)])
    arms[d, 0] = math.cos(0.1)
    arms[d, 1] = math.sin(0.1)
    theta = (S - 1.0) * np.ones(d) / math.sqrt(d)
    return HybridInstance(
        arms,
        theta,
        float(S),
        glm.bernoulli_logistic(),
        glm.bernoulli_logistic(),
        generator="basis_rotated",
    )


def gen_appendix_d_case(case: int, S: float = 5.0) -> HybridInstance:
    """The two concrete complexity-comparison instances (logistic channels).

    Case 1: K = d = 2, arms e1 and -e2, theta_star = (1, 0); the single duel
    observes the separating direction directly.
    Case 2: K = 3, d = 2, arms e1, e2 and cos(0.1) e1 + sin(0.1) e2,
    theta_star = (1, 0); the hard comparison is the pair (0, 2).
    """
    if case == 1:
        arms = np.array([[1.0, 0.0], [0.0, -1.0]])
    elif case == 2:
        arms = np.array([[1.0, 0.0], [0.0, 1.0], [math.cos(0.1), math.sin(0.1)]])
    else:
        raise ValueError(f"case must be 1 or 2, got {case}")
    theta = np.array([1.0, 0.0])
    return HybridInstance(
        arms,
        theta,
        float(S),
        glm.bernoulli_logistic(),
        glm.bernoulli_logistic(),
        generator=f"appendix_d_{case}",
    )


def gaussian_toy_1d() -> HybridInstance:
    """1-D gaussian toy: arms +1 and -1, theta_star = 1, both channels gaussian.

    The optimal design puts all mass on the duel; the characteristic time is
    0.5 in closed form, which makes this the basic solver oracle.
    """
    arms = np.array([[1.0], [-1.0]])
    theta = np.array([1.0])
    return HybridInstance(
        arms,
        theta,
        1.0,
        glm.gaussian(),
        glm.gaussian(),
        generator="gaussian_toy_1d",
    )


# ---------------------------------------------------------------------------
# serialization


def instance_to_json(instance: HybridInstance) -> str:
    """Lossless JSON encoding (Python float repr round-trips binary64)."""
    view_costs = instance.view().action_costs
    K = instance.K
    doc = {
        "arms": [list(map(float, row)) for row in instance.arms],
        "theta_star": list(map(float, instance.theta_star)),
        "S": float(instance.radius_S),
        "family_reward": instance.family_reward.family_id,
        "family_dueling": instance.family_dueling.family_id,
        "zeta_reward": float(instance.family_reward.dispersion_scale),
        "zeta_dueling": float(instance.family_dueling.dispersion_scale),
        "costs": {
            "reward": list(map(float, view_costs[:K])),
            "dueling": list(map(float, view_costs[K:])),
        },
        "generator": instance.generator,
    }
    return json.dumps(doc, indent=2)


def instance_from_json(text: str) -> HybridInstance:
    doc = json.loads(text)
    costs = np.asarray(doc["costs"]["reward"] + doc["costs"]["dueling"])
    return HybridInstance(
        np.asarray(doc["arms"], dtype=np.float64),
        np.asarray(doc["theta_star"], dtype=np.float64),
        float(doc["S"]),
        glm.family_from_id(doc["family_reward"], doc.get("zeta_reward", 1.0)),
        glm.family_from_id(doc["family_dueling"], doc.get("zeta_dueling", 1.0)),
        costs,
        generator=doc.get("generator", "custom"),
    )


def instance_digest(instance: HybridInstance) -> str:
    """Stable content hash, used to verify the shared-instance rule in sweeps."""
    return hashlib.sha256(instance_to_json(instance).encode()).hexdigest()
