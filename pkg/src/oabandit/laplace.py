"""Laplace approximation of softmax-times-Gaussian products.

For a Gaussian prior over the flattened parameter vector and a single
categorical observation with a softmax likelihood, fits a Gaussian to the
(unnormalizable) product and returns its normalization constant, which
doubles as the per-mixand observation evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .gaussmix import GaussianComponent, NaturalParams, ParameterBelief

__all__ = ["LaplaceResult", "laplace_update", "batch_laplace"]

_LOG_2PI = math.log(2.0 * math.pi)

GRAD_TOL = 1e-8
MAX_ITER = 100
MAX_HALVINGS = 30


@dataclass(frozen=True, eq=False)
class LaplaceResult:
    """Gaussian fit N(post_mean, post_cov) with log normalization constant.

    post_nat carries the same Gaussian in natural form; it falls out of the
    Newton solve for free and saves downstream refactorizations.
    """

    post_mean: np.ndarray
    post_cov: np.ndarray
    log_evidence: float
    iterations: int
    converged: bool
    post_nat: NaturalParams

    def component(self, log_weight: float = 0.0) -> GaussianComponent:
        return GaussianComponent(self.post_mean, self.post_cov, log_weight)


def _label_count(dim: int, context_len: int) -> int:
    if context_len < 1 or dim % context_len:
        raise ValueError(
            f"parameter dim {dim} is not a multiple of context length {context_len}"
        )
    return dim // context_len


def laplace_update(
    prior: GaussianComponent,
    f: int,
    x: np.ndarray,
    *,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> LaplaceResult:
    """Newton-mode Gaussian fit of softmax(f | theta, x) * N(theta; prior).

    The objective g(theta) = log softmax + log prior is concave, so Newton
    ascent from the prior mean with a halving line search converges; each
    accepted step does not decrease g. At the mode,
    post_cov = (prior_prec + (diag(p) - p p^T) kron x x^T)^-1 and
    log_evidence = g(mode) + (d/2) log 2pi - 0.5 log det post_prec.

    An all-zero context makes the likelihood the constant 1/F: the prior is
    returned unchanged with log_evidence = -log F, exactly.
    """
    x = np.asarray(x, dtype=float)
    d = prior.dim
    num_labels = _label_count(d, x.size)
    if not 1 <= f <= num_labels:
        raise ValueError(f"label {f} out of range 1..{num_labels}")
    if not x.any():
        return LaplaceResult(
            post_mean=prior.mean,
            post_cov=prior.cov,
            log_evidence=-math.log(num_labels),
            iterations=0,
            converged=True,
            post_nat=prior.natural,
        )

    nat = prior.natural
    prec = nat.quad_term
    lin = nat.lin_term
    xxt = np.outer(x, x)
    onehot = np.zeros(num_labels)
    onehot[f - 1] = 1.0
    ctx_len = x.size

    def loglik_probs(theta: np.ndarray):
        logits = x @ theta.reshape((ctx_len, num_labels), order="F")
        zmax = logits.max()
        ez = np.exp(logits - zmax)
        total = ez.sum()
        return float(logits[f - 1] - zmax - math.log(total)), ez / total

    theta = np.array(prior.mean)
    loglik, p = loglik_probs(theta)
    g_cur = loglik + nat.log_density(theta)

    iterations = 0
    converged = False
    for _ in range(max_iter):
        grad = np.kron(onehot - p, x) + lin - prec @ theta
        if np.abs(grad).max() <= tol:
            converged = True
            break
        hess = prec + np.kron(np.diag(p) - np.outer(p, p), xxt)
        factor = sla.cho_factor(hess, lower=True)
        step = sla.cho_solve(factor, grad)
        scale = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            cand = theta + scale * step
            loglik_c, p_c = loglik_probs(cand)
            g_new = loglik_c + nat.log_density(cand)
            if g_new >= g_cur:
                theta, g_cur, p = cand, g_new, p_c
                accepted = True
                break
            scale *= 0.5
        iterations += 1
        if not accepted:
            # no step improves g: numerically at the mode already
            break
    if not converged:
        converged = bool(
            np.abs(np.kron(onehot - p, x) + lin - prec @ theta).max() <= tol
        )

    post_prec = prec + np.kron(np.diag(p) - np.outer(p, p), xxt)
    post_prec = 0.5 * (post_prec + post_prec.T)
    chol = np.linalg.cholesky(post_prec)
    post_cov = sla.cho_solve((chol, True), np.eye(d))
    post_cov = 0.5 * (post_cov + post_cov.T)
    half_log_det = float(np.log(np.diag(chol)).sum())
    log_evidence = g_cur + 0.5 * d * _LOG_2PI - half_log_det
    post_lin = post_prec @ theta
    post_const = -0.5 * float(theta @ post_lin) - 0.5 * d * _LOG_2PI + half_log_det
    return LaplaceResult(
        post_mean=theta,
        post_cov=post_cov,
        log_evidence=log_evidence,
        iterations=iterations,
        converged=converged,
        post_nat=NaturalParams(
            const_term=post_const, lin_term=post_lin, quad_term=post_prec
        ),
    )


def batch_laplace(belief: ParameterBelief, f: int, x: np.ndarray) -> list[LaplaceResult]:
    """laplace_update applied to every mixand, order preserved."""
    results = []
    for u, comp in enumerate(belief.components):
        try:
            results.append(laplace_update(comp, f, x))
        except Exception as exc:
            raise RuntimeError(f"laplace update failed for mixand {u}: {exc}") from exc
    return results
