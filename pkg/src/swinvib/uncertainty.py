"""Closed-form uncertainty quantities over discrete response distributions.

Conventions: instance uncertainty, entropies, KL divergences and mean
answer-level uncertainty use natural logs; total response entropy uses
base-2 logs. 0 * log 0 is taken as 0 throughout. All arithmetic is
64-bit and every function here is pure.
"""

import math
from dataclasses import dataclass

import numpy as np

from .validation import (
    ValidationError,
    as_distribution,
    as_float_vector,
    check_same_length,
    check_unit_interval,
)


@dataclass(frozen=True)
class DiscreteDistribution:
    """A finite probability vector (entries >= 0, summing to 1 within 1e-9)."""

    probabilities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probabilities", as_distribution(self.probabilities))

    @property
    def support_size(self) -> int:
        return int(self.probabilities.size)


@dataclass(frozen=True)
class TokenLikelihoods:
    """Natural-log probabilities of one generated answer, one entry per token."""

    per_token_logprob: np.ndarray
    answer_length: int = 0

    def __post_init__(self):
        lp = as_float_vector(self.per_token_logprob, "per_token_logprob")
        if lp.size == 0:
            raise ValidationError("per_token_logprob must be non-empty")
        if np.any(lp > 0.0):
            raise ValidationError("log-probabilities must be <= 0")
        n = self.answer_length if self.answer_length else lp.size
        if n != lp.size:
            raise ValidationError(
                f"answer_length {n} does not match {lp.size} log-probabilities"
            )
        object.__setattr__(self, "per_token_logprob", lp)
        object.__setattr__(self, "answer_length", int(n))

    @property
    def psi(self) -> float:
        """Average token-wise negative log-likelihood of this answer."""
        return float(-np.mean(self.per_token_logprob))


@dataclass(frozen=True)
class ResponseTally:
    """Correct / uncertain response mass of an evaluation run."""

    acc: float
    uar: float
    epsilon: float = 1e-12

    def __post_init__(self):
        check_unit_interval(self.acc, "acc")
        check_unit_interval(self.uar, "uar")
        if self.acc + self.uar > 1.0 + 1e-12:
            raise ValidationError(f"acc + uar must be <= 1, got {self.acc + self.uar}")
        if self.epsilon <= 0.0:
            raise ValidationError("epsilon must be positive")


def instance_uncertainty(p: float) -> float:
    """-p * ln(p), extended by continuity to 0 at p = 0.

    Non-negative on [0, 1], zero at both endpoints, maximal at p = 1/e.
    """
    p = check_unit_interval(p, "p")
    if p == 0.0:
        return 0.0
    return -p * math.log(p)


def distribution_entropy(dist) -> float:
    """Shannon entropy in nats: sum of instance uncertainties over the support."""
    probs = dist.probabilities if isinstance(dist, DiscreteDistribution) else as_distribution(dist)
    nonzero = probs[probs > 0.0]
    return float(-np.sum(nonzero * np.log(nonzero)))


def conditional_entropy(joint) -> float:
    """Weighted expectation of instance-level uncertainty over (query, context) pairs.

    ``joint`` is an iterable of ``(q_weight, r_weight, response_dist)`` triples;
    the products q_weight * r_weight must form a probability distribution over
    the listed pairs. Returns
    ``sum_q p(q) sum_r p(r|q) sum_o -p(o|r,q) ln p(o|r,q)`` in nats.
    """
    entries = list(joint)
    if not entries:
        raise ValidationError("joint must be non-empty")
    total_mass = 0.0
    acc = 0.0
    for q_weight, r_weight, response_dist in entries:
        if q_weight < 0.0 or r_weight < 0.0:
            raise ValidationError("pair weights must be non-negative")
        mass = float(q_weight) * float(r_weight)
        total_mass += mass
        acc += mass * distribution_entropy(response_dist)
    if abs(total_mass - 1.0) > 1e-9:
        raise ValidationError(
            f"pair weights are not normalized: total joint mass {total_mass!r}"
        )
    return acc


def mean_psi(samples) -> float:
    """Mean over answers of the average token-wise negative log-likelihood."""
    samples = list(samples)
    if not samples:
        raise ValidationError("samples must be non-empty")
    return float(np.mean([s.psi for s in samples]))


def total_response_entropy(tally: ResponseTally) -> float:
    """Base-2 entropy of the (correct, incorrect, uncertain) response mass.

    A small epsilon is added inside each log to avoid log(0); terms with
    zero mass contribute exactly 0.
    """
    acc, uar, eps = tally.acc, tally.uar, tally.epsilon
    rest = 1.0 - acc - uar
    total = 0.0
    for mass in (acc, rest, uar):
        total += mass * math.log2(mass + eps)
    return -total


def gaussian_kl_to_standard(mu, log_var) -> float:
    """KL divergence of a diagonal Gaussian N(mu, diag(exp(log_var))) from N(0, I).

    Equals ``0.5 * sum(mu^2 + exp(log_var) - log_var - 1)``; non-negative,
    zero only at mu = 0, log_var = 0.
    """
    mu = as_float_vector(mu, "mu")
    log_var = as_float_vector(log_var, "log_var")
    check_same_length(mu, log_var, "mu", "log_var")
    return float(0.5 * np.sum(mu**2 + np.exp(log_var) - log_var - 1.0))


def entropy_drop_proxy(p0, p) -> tuple[float, float]:
    """Compare a baseline output distribution with an augmented one.

    Returns ``(u, delta_psi)`` where ``u = KL(p0 || p)`` in nats (+inf when
    ``p`` has zero mass where ``p0`` does not) and ``delta_psi`` is the
    entropy change ``H(p) - H(p0)``; a negative value means the augmented
    output became more confident.
    """
    p0 = p0.probabilities if isinstance(p0, DiscreteDistribution) else as_distribution(p0, "p0")
    p = p.probabilities if isinstance(p, DiscreteDistribution) else as_distribution(p, "p")
    if p0.size != p.size:
        raise ValidationError(f"support mismatch: {p0.size} vs {p.size}")
    mask = p0 > 0.0
    if np.any(p[mask] == 0.0):
        u = math.inf
    else:
        u = float(np.sum(p0[mask] * (np.log(p0[mask]) - np.log(p[mask]))))
    delta_psi = distribution_entropy(p) - distribution_entropy(p0)
    return u, delta_psi
