"""Belief updates from semantic observations.

Two fusion paths: a naive per-mixand Bayes update for trusted (internal)
observations, and a robust update for possibly faulty external observations
that mixes the naive posterior with the untouched prior, weighted by the
posterior probability that the observation was correct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussmix import ParameterBelief, normalized_belief, runnalls_reduce
from .laplace import batch_laplace

__all__ = [
    "AssociationPosterior",
    "FusionConfig",
    "UpdateOutcome",
    "naive_update",
    "association_probabilities",
    "psda_update",
]


@dataclass(frozen=True)
class AssociationPosterior:
    """Posterior probabilities that an external observation is wrong/right."""

    gamma0: float
    gamma1: float

    def __post_init__(self):
        if not (0.0 <= self.gamma0 <= 1.0 and 0.0 <= self.gamma1 <= 1.0):
            raise ValueError("association probabilities must lie in [0, 1]")
        if abs(self.gamma0 + self.gamma1 - 1.0) > 1e-12:
            raise ValueError("association probabilities must sum to 1")


@dataclass(frozen=True)
class FusionConfig:
    """Fault prior and mixture housekeeping for external-observation fusion."""

    fp_rate: float
    label_count: int
    reduction_threshold: int = 10

    def __post_init__(self):
        if not 0.0 <= self.fp_rate <= 1.0:
            raise ValueError("fp_rate must lie in [0, 1]")
        if self.label_count < 2:
            raise ValueError("need at least two labels")
        if self.reduction_threshold < 1:
            raise ValueError("reduction threshold must be >= 1")


@dataclass(frozen=True, eq=False)
class UpdateOutcome:
    """Fused belief plus the quantities worth auditing.

    lam is the prior predictive evidence sum_u w_u C_u of the observation.
    assoc is None for naive updates. pre_reduction is the mixture before any
    component-count reduction (equal to belief when none was needed).
    """

    belief: ParameterBelief
    lam: float
    assoc: AssociationPosterior | None
    pre_reduction: ParameterBelief


def _posterior_parts(belief: ParameterBelief, f: int, x: np.ndarray):
    """Per-mixand Laplace posteriors, their log evidences, and log lambda."""
    results = batch_laplace(belief, f, x)
    log_w = belief.log_weights
    log_ev = np.array([r.log_evidence for r in results])
    scaled = log_w + log_ev
    m = scaled.max()
    log_lam = m + math.log(np.exp(scaled - m).sum())
    return results, scaled, log_lam


def naive_update(belief: ParameterBelief, f: int, x: np.ndarray) -> UpdateOutcome:
    """Bayes update trusting the observation: each mixand is replaced by its
    Laplace posterior and reweighted by its evidence share."""
    results, scaled, log_lam = _posterior_parts(belief, f, x)
    lam = math.exp(log_lam)
    if not lam > 0.0:
        raise FloatingPointError("prior predictive evidence underflowed to zero")
    comps = tuple(
        r.component(log_weight=float(s - log_lam)) for r, s in zip(results, scaled)
    )
    posterior = ParameterBelief(components=comps, option=belief.option)
    return UpdateOutcome(belief=posterior, lam=lam, assoc=None, pre_reduction=posterior)


def association_probabilities(lam: float, cfg: FusionConfig) -> AssociationPosterior:
    """gamma0 = (FP/F) / (FP/F + (1-FP) lam), gamma1 its complement."""
    if not lam > 0.0:
        raise ValueError("prior predictive evidence must be positive")
    wrong = cfg.fp_rate / cfg.label_count
    right = (1.0 - cfg.fp_rate) * lam
    total = wrong + right
    return AssociationPosterior(gamma0=wrong / total, gamma1=right / total)


def psda_update(
    belief: ParameterBelief, f: int, x: np.ndarray, cfg: FusionConfig
) -> UpdateOutcome:
    """Robust update for a possibly faulty observation.

    Stacks the prior mixands (weights scaled by gamma0) with the naive
    posterior mixands (scaled by gamma1), doubling the component count, then
    reduces back to the configured threshold. Components whose association
    weight is exactly zero are dropped rather than stacked.
    """
    results, scaled, log_lam = _posterior_parts(belief, f, x)
    lam = math.exp(log_lam)
    assoc = association_probabilities(lam, cfg)

    stacked = []
    if assoc.gamma0 > 0.0:
        lg0 = math.log(assoc.gamma0)
        stacked.extend(c.with_log_weight(c.log_weight + lg0) for c in belief.components)
    if assoc.gamma1 > 0.0:
        lg1 = math.log(assoc.gamma1)
        stacked.extend(
            r.component(log_weight=float(s - log_lam) + lg1)
            for r, s in zip(results, scaled)
        )
    pre_reduction = normalized_belief(stacked, option=belief.option)
    reduced = runnalls_reduce(pre_reduction, cfg.reduction_threshold)
    return UpdateOutcome(belief=reduced, lam=lam, assoc=assoc, pre_reduction=pre_reduction)
