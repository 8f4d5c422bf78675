"""Numerical checks of the exponentially-tilted decision model.

A tilted family reweights base weights ``a_o`` by ``exp(alpha * b_o)``,
where ``b_o`` is the score contrast a decision option carries. Entropy of
the tilted distribution is provably non-increasing in the tilt strength;
this module exposes the closed-form derivative next to a finite-difference
oracle, the uncertainty-vs-contrast curve, and a mixing-ratio simulator
whose uncertainty peaks at the balanced mixture.
"""

from dataclasses import dataclass

import numpy as np

from .uncertainty import DiscreteDistribution, distribution_entropy, instance_uncertainty
from .validation import ValidationError, as_float_vector, check_same_length

FD_STEP = 1e-5


@dataclass(frozen=True)
class TiltedFamily:
    """Base weights ``a`` (> 0), per-option scores ``b``, tilt strength ``alpha`` (> 0)."""

    a: np.ndarray
    b: np.ndarray
    alpha: float

    def __post_init__(self):
        a = as_float_vector(self.a, "a")
        b = as_float_vector(self.b, "b")
        check_same_length(a, b, "a", "b")
        if a.size < 2:
            raise ValidationError("a tilted family needs at least 2 options")
        if np.any(a <= 0.0):
            raise ValidationError("base weights a must be strictly positive")
        if not self.alpha > 0.0:
            raise ValidationError(f"alpha must be > 0, got {self.alpha!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "alpha", float(self.alpha))


def tilted_distribution(family: TiltedFamily) -> DiscreteDistribution:
    """p(o) proportional to a_o * exp(alpha * b_o), computed with a max shift."""
    return DiscreteDistribution(_tilted_probs(family.a, family.b, family.alpha))


def _tilted_probs(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    logits = np.log(a) + alpha * b
    logits -= logits.max()
    weights = np.exp(logits)
    return weights / weights.sum()


def tilted_entropy(family: TiltedFamily) -> float:
    return distribution_entropy(_tilted_probs(family.a, family.b, family.alpha))


def tilted_entropy_derivative(family: TiltedFamily) -> tuple[float, float]:
    """d/d(alpha) of the tilted entropy, analytic and finite-difference.

    Analytic form: ``-alpha * Var_p(b) - Cov_p(log a, b)`` under the tilted
    distribution. The numeric value is a central difference with step 1e-5,
    returned alongside for cross-checking.
    """
    p = _tilted_probs(family.a, family.b, family.alpha)
    b = family.b
    log_a = np.log(family.a)
    mean_b = float(p @ b)
    var_b = float(p @ (b - mean_b) ** 2)
    cov_log_a_b = float(p @ ((log_a - p @ log_a) * (b - mean_b)))
    analytic = -family.alpha * var_b - cov_log_a_b

    h = min(FD_STEP, family.alpha / 2.0)
    upper = distribution_entropy(_tilted_probs(family.a, family.b, family.alpha + h))
    lower = distribution_entropy(_tilted_probs(family.a, family.b, family.alpha - h))
    numeric = (upper - lower) / (2.0 * h)
    return analytic, numeric


def psi_vs_delta_i_curve(delta_i_grid, alpha: float = 1.0) -> list[tuple[float, float]]:
    """Uncertainty of the dominant option as the score contrast grows.

    For each contrast ``d`` the binary family has uniform base weights and
    scores ``[0, d]``; the emitted value is the instance uncertainty of the
    distribution's largest component. The curve is symmetric in the sign of
    ``d`` and non-increasing in ``|d|`` (verified before returning).
    """
    grid = as_float_vector(delta_i_grid, "delta_i_grid")
    if grid.size == 0:
        raise ValidationError("delta_i_grid must be non-empty")
    a = np.array([1.0, 1.0])
    curve = []
    for d in grid:
        p = _tilted_probs(a, np.array([0.0, float(d)]), alpha)
        curve.append((float(d), instance_uncertainty(float(p.max()))))

    by_abs = sorted(curve, key=lambda item: abs(item[0]))
    for (d_lo, psi_lo), (d_hi, psi_hi) in zip(by_abs, by_abs[1:]):
        if psi_hi > psi_lo + 1e-12 and abs(d_hi) > abs(d_lo):
            raise RuntimeError(
                f"curve is not non-increasing in |contrast|: psi({d_hi}) > psi({d_lo})"
            )
    return curve


@dataclass(frozen=True)
class MixRatioScenario:
    """A context mixing ``n_conflicting`` vs ``n_supplementary`` evidence units."""

    n_conflicting: int
    n_supplementary: int
    per_context_evidence_strength: float = 1.0

    def __post_init__(self):
        if self.n_conflicting < 0 or self.n_supplementary < 0:
            raise ValidationError("evidence counts must be non-negative")
        if self.n_conflicting + self.n_supplementary < 1:
            raise ValidationError("a scenario needs at least one evidence unit")
        if not self.per_context_evidence_strength > 0.0:
            raise ValidationError("evidence strength must be positive")

    @property
    def label(self) -> str:
        return f"{self.n_conflicting}:{self.n_supplementary}"


def mix_ratio_uncertainty(scenarios) -> list[tuple[str, float]]:
    """Decision uncertainty per mixing ratio.

    The aggregate score contrast of a scenario is
    ``strength * (n_conflicting - n_supplementary)``; the reported value is
    the dominant-option uncertainty of the resulting binary tilted
    distribution, which peaks at the balanced ratio.
    """
    scenarios = list(scenarios)
    if not scenarios:
        raise ValidationError("scenarios must be non-empty")
    a = np.array([1.0, 1.0])
    rows = []
    for sc in scenarios:
        contrast = sc.per_context_evidence_strength * (sc.n_conflicting - sc.n_supplementary)
        p = _tilted_probs(a, np.array([0.0, contrast]), 1.0)
        rows.append((sc.label, instance_uncertainty(float(p.max()))))
    return rows
