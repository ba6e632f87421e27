"""Exponential-family observation models for the reward and dueling channels.

Both feedback channels are one-parameter exponential families with canonical
link: an observation ``z`` given natural parameter ``eta`` has density

    p(z | eta) = exp((z * eta - b(eta)) / zeta + c(z)),

so the mean is ``mu(eta) = b'(eta)`` and the curvature is ``mu'(eta) =
b''(eta)``.  Two families are shipped: ``gaussian`` (identity link, constant
curvature) and ``bernoulli_logistic`` (sigmoid link).  A Poisson slot could be
added with the same interface but is intentionally not implemented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GAUSSIAN = "gaussian"
BERNOULLI_LOGISTIC = "bernoulli_logistic"

FAMILY_IDS = (GAUSSIAN, BERNOULLI_LOGISTIC)

#: integer codes used by the array kernels (0 = gaussian, 1 = bernoulli)
FAMILY_CODES = {GAUSSIAN: 0, BERNOULLI_LOGISTIC: 1}

_DEFAULT_SC_CONSTANT = {GAUSSIAN: 0.0, BERNOULLI_LOGISTIC: 1.0}


@dataclass(frozen=True)
class GlmFamily:
    """A one-parameter exponential family observation model.

    dispersion_scale is the zeta factor dividing every log-likelihood term;
    sc_constant is the self-concordance constant M with |mu''| <= M * mu'.
    The default M is 0 for gaussian and 1 for bernoulli_logistic; it can be
    overridden (e.g. to probe violated self-concordance in tests).
    """

    family_id: str
    dispersion_scale: float = 1.0
    sc_constant: float = field(default=-1.0)

    def __post_init__(self):
        if self.family_id not in FAMILY_IDS:
            raise ValueError(f"unknown family_id {self.family_id!r}")
        if not (self.dispersion_scale > 0 and math.isfinite(self.dispersion_scale)):
            raise ValueError("dispersion_scale must be positive and finite")
        if self.sc_constant < 0:
            object.__setattr__(
                self, "sc_constant", _DEFAULT_SC_CONSTANT[self.family_id]
            )

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family_id]


def gaussian(dispersion_scale: float = 1.0) -> GlmFamily:
    return GlmFamily(GAUSSIAN, dispersion_scale)


def bernoulli_logistic(dispersion_scale: float = 1.0) -> GlmFamily:
    return GlmFamily(BERNOULLI_LOGISTIC, dispersion_scale)


def family_from_id(family_id: str, dispersion_scale: float = 1.0) -> GlmFamily:
    return GlmFamily(family_id, dispersion_scale)


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not math.isfinite(eta):
        raise ValueError(f"eta must be finite, got {eta}")
    return eta


def _sigmoid(eta: float) -> float:
    if eta >= 0.0:
        return 1.0 / (1.0 + math.exp(-eta))
    t = math.exp(eta)
    return t / (1.0 + t)


def log_partition(family: GlmFamily, eta: float) -> float:
    """b(eta).  For the logistic family uses the overflow-safe split
    log(1+e^eta) = eta + log(1+e^-eta) for eta > 0."""
    eta = _check_eta(eta)
    if family.family_id == GAUSSIAN:
        return 0.5 * eta * eta
    if eta > 0.0:
        return eta + math.log1p(math.exp(-eta))
    return math.log1p(math.exp(eta))


def mean(family: GlmFamily, eta: float) -> float:
    """mu(eta) = b'(eta)."""
    eta = _check_eta(eta)
    if family.family_id == GAUSSIAN:
        return eta
    return _sigmoid(eta)


def mean_prime(family: GlmFamily, eta: float) -> float:
    """mu'(eta) = b''(eta) >= 0."""
    eta = _check_eta(eta)
    if family.family_id == GAUSSIAN:
        return 1.0
    s = _sigmoid(eta)
    return s * (1.0 - s)


def mean_second(family: GlmFamily, eta: float) -> float:
    """mu''(eta), analytic per family (gaussian: 0; logistic: s'(1-2s))."""
    eta = _check_eta(eta)
    if family.family_id == GAUSSIAN:
        return 0.0
    s = _sigmoid(eta)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def mean_abs_bound(family: GlmFamily, eta_bound: float) -> float:
    """sup of |mu(eta)| over |eta| <= eta_bound.

    The bernoulli mean is globally bounded by 1, so the global bound is used
    there; it keeps the Lipschitz accounting simple and remains valid.
    """
    if eta_bound < 0:
        raise ValueError("eta_bound must be nonnegative")
    if family.family_id == GAUSSIAN:
        return float(eta_bound)
    return 1.0


def neg_log_lik(family: GlmFamily, z: float, eta: float) -> float:
    """Per-sample negative log-likelihood term (b(eta) - z*eta) / zeta."""
    eta = _check_eta(eta)
    z = float(z)
    if family.family_id == BERNOULLI_LOGISTIC:
        if z not in (0.0, 1.0):
            raise ValueError(f"bernoulli observation must be 0 or 1, got {z}")
    elif not math.isfinite(z):
        raise ValueError(f"observation must be finite, got {z}")
    return (log_partition(family, eta) - z * eta) / family.dispersion_scale


def sample(family: GlmFamily, eta: float, rng: np.random.Generator) -> float:
    """Draw one observation at natural parameter eta.

    gaussian: eta + noise with variance dispersion_scale.
    bernoulli_logistic: 1 with probability sigmoid(eta) else 0.
    """
    eta = _check_eta(eta)
    if family.family_id == GAUSSIAN:
        return eta + math.sqrt(family.dispersion_scale) * rng.standard_normal()
    return 1.0 if rng.random() < _sigmoid(eta) else 0.0


def self_concordance_margin(
    family: GlmFamily, eta_bound: float, grid_size: int
) -> float:
    """min over an eta grid of M * mu'(eta) - |mu''(eta)|.

    Nonnegative (up to float error) whenever the family really is
    M-self-concordant on [-eta_bound, eta_bound].
    """
    if not eta_bound > 0:
        raise ValueError("eta_bound must be positive")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    grid = np.linspace(-eta_bound, eta_bound, int(grid_size))
    margin = math.inf
    for eta in grid:
        m = family.sc_constant * mean_prime(family, eta) - abs(
            mean_second(family, eta)
        )
        margin = min(margin, m)
    return margin
