"""Gaussian and Gaussian-mixture machinery.

Weighted Gaussian components over flattened parameter vectors, conversion to
natural (information) form, moment matching, and greedy pairwise mixture
reduction using the Runnalls KL upper bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg as sla

__all__ = [
    "GaussianComponent",
    "NaturalParams",
    "ParameterBelief",
    "to_natural",
    "from_natural",
    "normalized_belief",
    "moment_match",
    "runnalls_reduce",
    "mixture_log_pdf",
    "mixture_mean",
]

_SYM_TOL = 1e-10
_WEIGHT_TOL = 1e-9
WEIGHT_FLOOR = 1e-12

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """One weighted mixand: mean vector, SPD covariance, log weight."""

    mean: np.ndarray
    cov: np.ndarray
    log_weight: float = 0.0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("cov shape does not match mean length")
        if not np.isfinite(self.log_weight):
            raise ValueError("log_weight must be finite")
        asym = np.abs(cov - cov.T).max() if cov.size else 0.0
        if asym > _SYM_TOL:
            raise ValueError(f"covariance asymmetric by {asym:.3e} > {_SYM_TOL}")
        cov = 0.5 * (cov + cov.T)
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        self.chol  # fail fast on non-SPD covariance

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)

    @cached_property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of the covariance."""
        try:
            return np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc

    @cached_property
    def log_det_cov(self) -> float:
        return 2.0 * float(np.log(np.diag(self.chol)).sum())

    @cached_property
    def natural(self) -> "NaturalParams":
        return to_natural(self)

    def log_pdf(self, x: np.ndarray) -> float:
        """Log density of the (normalized) Gaussian, ignoring the weight."""
        x = np.asarray(x, dtype=float)
        if x.shape != self.mean.shape:
            raise ValueError("dimension mismatch")
        y = sla.solve_triangular(self.chol, x - self.mean, lower=True)
        return -0.5 * (y @ y + self.dim * _LOG_2PI + self.log_det_cov)

    def with_log_weight(self, log_weight: float) -> "GaussianComponent":
        """Reweighted copy sharing the validated arrays and any cached
        factorizations, skipping revalidation."""
        if not np.isfinite(log_weight):
            raise ValueError("log_weight must be finite")
        clone = object.__new__(GaussianComponent)
        object.__setattr__(clone, "mean", self.mean)
        object.__setattr__(clone, "cov", self.cov)
        object.__setattr__(clone, "log_weight", float(log_weight))
        for key in ("chol", "log_det_cov", "natural"):
            if key in self.__dict__:
                clone.__dict__[key] = self.__dict__[key]
        return clone

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.chol @ rng.standard_normal(self.dim)


@dataclass(frozen=True, eq=False)
class NaturalParams:
    """Exponential-form parameters of a Gaussian density
    exp(const + lin.T theta - 0.5 theta.T quad theta)."""

    const_term: float
    lin_term: np.ndarray
    quad_term: np.ndarray

    def log_density(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(
            self.const_term + self.lin_term @ theta - 0.5 * theta @ self.quad_term @ theta
        )


def to_natural(g: GaussianComponent) -> NaturalParams:
    """Moment form -> natural form: quad = cov^-1, lin = cov^-1 mean,
    const = -0.5 mean.T quad mean - 0.5 log((2 pi)^d det cov)."""
    eye = np.eye(g.dim)
    quad = sla.cho_solve((g.chol, True), eye)
    quad = 0.5 * (quad + quad.T)
    lin = quad @ g.mean
    const = -0.5 * float(g.mean @ lin) - 0.5 * (g.dim * _LOG_2PI + g.log_det_cov)
    return NaturalParams(const_term=const, lin_term=lin, quad_term=quad)


def from_natural(nat: NaturalParams, log_weight: float = 0.0) -> GaussianComponent:
    """Invert to_natural; the const term is implied by normalization."""
    quad = np.atleast_2d(nat.quad_term)
    chol = np.linalg.cholesky(quad)
    cov = sla.cho_solve((chol, True), np.eye(quad.shape[0]))
    cov = 0.5 * (cov + cov.T)
    mean = sla.cho_solve((chol, True), np.atleast_1d(nat.lin_term))
    return GaussianComponent(mean=mean, cov=cov, log_weight=log_weight)


@dataclass(frozen=True, eq=False)
class ParameterBelief:
    """Gaussian-mixture belief over one option's flattened parameter vector."""

    components: tuple[GaussianComponent, ...]
    option: int | None = None

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("belief needs at least one component")
        d = comps[0].dim
        if any(c.dim != d for c in comps):
            raise ValueError("components have mixed dimensions")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"component weights sum to {total}, not 1")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def num_components(self) -> int:
        return len(self.components)

    @property
    def log_weights(self) -> np.ndarray:
        return np.array([c.log_weight for c in self.components])

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def to_json(self) -> str:
        doc = {
            "option": self.option,
            "components": [
                {
                    "log_weight": c.log_weight,
                    "mean": c.mean.tolist(),
                    "cov": c.cov.tolist(),
                }
                for c in self.components
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ParameterBelief":
        doc = json.loads(text)
        comps = tuple(
            GaussianComponent(
                mean=np.array(c["mean"]),
                cov=np.array(c["cov"]),
                log_weight=c["log_weight"],
            )
            for c in doc["components"]
        )
        return cls(components=comps, option=doc.get("option"))


def normalized_belief(
    components: list[GaussianComponent] | tuple[GaussianComponent, ...],
    option: int | None = None,
) -> ParameterBelief:
    """Belief from components whose weights may not sum to one; components
    below the weight floor are dropped before renormalizing."""
    weights = np.array([c.weight for c in components])
    total = weights.sum()
    if total <= 0:
        raise ValueError("all component weights are zero")
    keep = weights / total >= WEIGHT_FLOOR
    kept = [c for c, k in zip(components, keep) if k]
    weights = weights[keep] / weights[keep].sum()
    comps = tuple(
        c.with_log_weight(float(np.log(w))) for c, w in zip(kept, weights)
    )
    return ParameterBelief(components=comps, option=option)


def moment_match(components: list[GaussianComponent]) -> GaussianComponent:
    """Single Gaussian matching the mixture's first two moments exactly.

    Weights are renormalized internally; the output carries the summed
    weight: mean = sum w_i mu_i, cov = sum w_i (S_i + mu_i mu_i^T) - mu mu^T.
    """
    if not components:
        raise ValueError("nothing to match")
    w = np.array([c.weight for c in components])
    total = w.sum()
    if total <= 0:
        raise ValueError("all component weights are zero")
    wn = w / total
    means = np.stack([c.mean for c in components])
    mean = wn @ means
    cov = np.zeros((means.shape[1], means.shape[1]))
    for wi, c in zip(wn, components):
        diff = c.mean - mean
        cov += wi * (c.cov + np.outer(diff, diff))
    cov = 0.5 * (cov + cov.T)
    return GaussianComponent(mean=mean, cov=cov, log_weight=float(np.log(total)))


def pairwise_merge_costs(w: np.ndarray, means: np.ndarray, covs: np.ndarray):
    """Runnalls upper bounds B(i,j) for merging every component pair.

    B(i,j) = 0.5 [(w_i + w_j) log det S_ij - w_i log det S_i - w_j log det S_j]
    with S_ij the moment-matched covariance of the pair. Returns an (m, m)
    matrix with +inf on and below the diagonal, plus the pairwise
    moment-matched means and covariances for reuse by the caller.
    """
    m = w.size
    wij = w[:, None] + w[None, :]
    mu_ij = (w[:, None, None] * means[:, None, :] + w[None, :, None] * means[None, :, :])
    mu_ij /= wij[:, :, None]
    di = means[:, None, :] - mu_ij
    dj = means[None, :, :] - mu_ij
    cov_ij = (
        w[:, None, None, None] * (covs[:, None] + di[..., :, None] * di[..., None, :])
        + w[None, :, None, None] * (covs[None, :] + dj[..., :, None] * dj[..., None, :])
    )
    cov_ij /= wij[:, :, None, None]
    sign, logdet_ij = np.linalg.slogdet(cov_ij)
    if not np.all(sign[~np.eye(m, dtype=bool)] > 0):
        raise FloatingPointError("moment-matched pair covariance not positive definite")
    _, logdet = np.linalg.slogdet(covs)
    w_logdet = w * logdet
    costs = 0.5 * (wij * logdet_ij - w_logdet[:, None] - w_logdet[None, :])
    costs[np.tril_indices(m)] = np.inf
    return costs, mu_ij, cov_ij


def runnalls_reduce(belief: ParameterBelief, max_components: int) -> ParameterBelief:
    """Greedily merge the pair with the smallest Runnalls bound until the
    mixture has at most max_components mixands.

    Ties break on the lexicographically smallest pair (i, j). Weights are
    renormalized on output.
    """
    if max_components < 1:
        raise ValueError("max_components must be >= 1")
    if belief.num_components <= max_components:
        return belief
    w = belief.weights
    means = np.stack([c.mean for c in belief.components])
    covs = np.stack([c.cov for c in belief.components])
    while w.size > max_components:
        costs, mu_ij, cov_ij = pairwise_merge_costs(w, means, covs)
        i, j = np.unravel_index(int(np.argmin(costs)), costs.shape)
        merged_cov = 0.5 * (cov_ij[i, j] + cov_ij[i, j].T)
        means = np.delete(means, j, axis=0)
        covs = np.delete(covs, j, axis=0)
        means[i] = mu_ij[i, j]
        covs[i] = merged_cov
        w_merged = w[i] + w[j]
        w = np.delete(w, j)
        w[i] = w_merged
    comps = [
        GaussianComponent(mean=mu, cov=cov, log_weight=float(np.log(wi)))
        for wi, mu, cov in zip(w, means, covs)
    ]
    return normalized_belief(comps, option=belief.option)


def mixture_log_pdf(belief: ParameterBelief, theta: np.ndarray) -> float:
    """log sum_u w_u N(theta; mu_u, S_u) via log-sum-exp."""
    terms = np.array([c.log_weight + c.log_pdf(theta) for c in belief.components])
    m = terms.max()
    return float(m + np.log(np.exp(terms - m).sum()))


def mixture_mean(belief: ParameterBelief) -> np.ndarray:
    """Weighted mean sum_u w_u mu_u."""
    return belief.weights @ np.stack([c.mean for c in belief.components])
