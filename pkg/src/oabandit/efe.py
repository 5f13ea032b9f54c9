"""Expected free energy of selecting an option, for mixture beliefs and a
softmax outcome likelihood.

Per candidate outcome the score splits into a risk term, the predictive
probability weighted against a preference distribution over outcomes, and an
ambiguity term, the expected log-likelihood under the updated belief. The
intractable log-softmax expectation is handled by re-expressing the
likelihood in Gaussian exponential form from each mixand's prior/posterior
natural-parameter pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussmix import GaussianComponent, NaturalParams, ParameterBelief
from .laplace import batch_laplace

__all__ = [
    "EvolutionaryPrior",
    "LikelihoodExpForm",
    "OutcomeTerm",
    "EfeScore",
    "predictive_prob",
    "likelihood_exp_form",
    "expected_quadratic",
    "efe",
]


@dataclass(frozen=True, eq=False)
class EvolutionaryPrior:
    """Preference weights over outcome labels, strictly positive.

    Stored unnormalized: a global rescaling shifts every option's score by
    the same constant and cannot change which option minimizes it.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if probs.ndim != 1 or probs.size < 2:
            raise ValueError("need a weight per label, at least two labels")
        if not np.all(probs > 0.0):
            raise ValueError("preference weights must be strictly positive")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @classmethod
    def peaked(
        cls,
        num_labels: int,
        preferred_label: int,
        preferred_value: float = 1.0,
        other_value: float = 0.01,
    ) -> "EvolutionaryPrior":
        probs = np.full(num_labels, other_value)
        probs[preferred_label - 1] = preferred_value
        return cls(probs)

    def log_prob(self, o: int) -> float:
        return float(np.log(self.probs[o - 1]))


@dataclass(frozen=True, eq=False)
class LikelihoodExpForm:
    """Gaussian exponential-form fit of the likelihood of one outcome:
    p(o|theta) ~= exp(g_const + h_lin.T theta - 0.5 theta.T k_quad theta)."""

    g_const: float
    h_lin: np.ndarray
    k_quad: np.ndarray

    def log_value(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(
            self.g_const + self.h_lin @ theta - 0.5 * theta @ self.k_quad @ theta
        )


@dataclass(frozen=True)
class OutcomeTerm:
    o: int
    q: float
    term1: float
    term2: float


@dataclass(frozen=True, eq=False)
class EfeScore:
    option: int | None
    total: float
    per_outcome: tuple[OutcomeTerm, ...]

    def as_dict(self) -> dict:
        return {
            "option": self.option,
            "total": self.total,
            "per_outcome": [
                {"o": t.o, "q": t.q, "term1": t.term1, "term2": t.term2}
                for t in self.per_outcome
            ],
        }


def predictive_prob(
    belief: ParameterBelief, o: int, x: np.ndarray
) -> tuple[float, np.ndarray]:
    """Predictive outcome probability q(o) = sum_u w_u C_u and the per-mixand
    evidences C_u, cached by callers that need both."""
    results = batch_laplace(belief, o, x)
    evidences = np.exp([r.log_evidence for r in results])
    q_o = float(belief.weights @ evidences)
    return q_o, evidences


def likelihood_exp_form(
    prior_nat: NaturalParams, post_nat: NaturalParams, log_evidence: float
) -> LikelihoodExpForm:
    """Divide the evidence-scaled posterior by the prior in natural form."""
    return LikelihoodExpForm(
        g_const=post_nat.const_term + log_evidence - prior_nat.const_term,
        h_lin=post_nat.lin_term - prior_nat.lin_term,
        k_quad=post_nat.quad_term - prior_nat.quad_term,
    )


def _expected_quadratic(mu: np.ndarray, cov: np.ndarray, form: LikelihoodExpForm) -> float:
    return float(
        form.g_const
        + form.h_lin @ mu
        - 0.5 * (mu @ form.k_quad @ mu + (form.k_quad * cov).sum())
    )


def expected_quadratic(g: GaussianComponent, form: LikelihoodExpForm) -> float:
    """E[g_const + h.T theta - 0.5 theta.T k theta] under N(mean, cov):
    g_const + h.mu - 0.5 (mu.T k mu + trace(k cov))."""
    if g.mean.shape != form.h_lin.shape:
        raise ValueError("dimension mismatch")
    return _expected_quadratic(g.mean, g.cov, form)


def efe(belief: ParameterBelief, x: np.ndarray, ev: EvolutionaryPrior) -> EfeScore:
    """Score one option: sum over outcomes of risk minus expected
    log-likelihood, each outcome weighted by its predictive probability.

    The exponential-form likelihood fit and its expectation are taken per
    (mixand, outcome) pair, with the expectation under that mixand's updated
    Gaussian.
    """
    weights = belief.weights
    terms = []
    total = 0.0
    for o in range(1, ev.probs.size + 1):
        results = batch_laplace(belief, o, x)
        evidences = np.exp([r.log_evidence for r in results])
        q_o = float(weights @ evidences)
        term1 = q_o * (math.log(q_o) - ev.log_prob(o))
        term2 = 0.0
        for w_u, res, c_u, prior in zip(weights, results, evidences, belief.components):
            form = likelihood_exp_form(prior.natural, res.post_nat, res.log_evidence)
            term2 += w_u * c_u * _expected_quadratic(res.post_mean, res.post_cov, form)
        terms.append(OutcomeTerm(o=o, q=q_o, term1=term1, term2=term2))
        total += term1 - term2
    return EfeScore(option=belief.option, total=total, per_outcome=tuple(terms))
