"""Independent reference computations used by the test suite.

Everything here deliberately avoids the library's own Laplace/fusion/EFE
code paths: evidences come from quadrature or plain Monte Carlo over the
exact softmax, posteriors from grid normalization, and policy references
from hand-rolled formulas.
"""

from __future__ import annotations

import numpy as np


def softmax_exact_mpmath(theta_entries, x, dps: int = 50):
    """Arbitrary-precision softmax probabilities for a (C, F) matrix."""
    import mpmath

    with mpmath.workdps(dps):
        logits = [
            mpmath.fsum(mpmath.mpf(theta_entries[c][f]) * mpmath.mpf(x[c])
                        for c in range(len(x)))
            for f in range(len(theta_entries[0]))
        ]
        exps = [mpmath.e**z for z in logits]
        total = mpmath.fsum(exps)
        return [float(e / total) for e in exps]


def binary_logit_stats(mean, cov, x):
    """Mean/std of z = (theta_1 - theta_2).x for a two-label flat belief.

    With label-block flattening the first block holds label 1's weights and
    the second block label 2's, so z = a.theta with a = [x, -x]; the model's
    evidence for label 1 is exactly a one-dimensional integral over z.
    """
    x = np.asarray(x, dtype=float)
    a = np.concatenate([x, -x])
    mz = float(a @ np.asarray(mean))
    vz = float(a @ np.asarray(cov) @ a)
    return mz, np.sqrt(vz)


def evidence_quadrature_binary(mean, cov, x, f, num_points: int = 100_000,
                               half_width_sigmas: float = 12.0):
    """Trapezoid evidence of one label in a two-label model, via the exact
    reduction to the scalar logit difference z."""
    mz, sz = binary_logit_stats(mean, cov, x)
    if sz == 0.0:
        p1 = 1.0 / (1.0 + np.exp(-mz))
        return p1 if f == 1 else 1.0 - p1
    z = np.linspace(mz - half_width_sigmas * sz, mz + half_width_sigmas * sz, num_points)
    phi = np.exp(-0.5 * ((z - mz) / sz) ** 2) / (sz * np.sqrt(2 * np.pi))
    sigma = 1.0 / (1.0 + np.exp(-z))
    integrand = sigma if f == 1 else 1.0 - sigma
    return float(np.trapezoid(integrand * phi, z))


def posterior_z_mean_quadrature_binary(mean, cov, x, f, num_points: int = 100_000,
                                       half_width_sigmas: float = 12.0):
    """Posterior mean of the logit difference z after observing label f."""
    mz, sz = binary_logit_stats(mean, cov, x)
    z = np.linspace(mz - half_width_sigmas * sz, mz + half_width_sigmas * sz, num_points)
    phi = np.exp(-0.5 * ((z - mz) / sz) ** 2) / (sz * np.sqrt(2 * np.pi))
    sigma = 1.0 / (1.0 + np.exp(-z))
    lik = sigma if f == 1 else 1.0 - sigma
    w = lik * phi
    return float(np.trapezoid(z * w, z) / np.trapezoid(w, z))


def softmax_probs_flat(thetas: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact softmax outcome probabilities for flattened parameter rows.

    thetas has shape (n, C*F) in label-block order; returns (n, F).
    """
    x = np.asarray(x, dtype=float)
    n, d = thetas.shape
    c = x.size
    logits = thetas.reshape(n, d // c, c) @ x
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def evidence_monte_carlo(mean, cov, x, f, num_samples: int, rng):
    """Plain Monte-Carlo evidence estimate: mean and standard error of the
    exact likelihood under prior samples."""
    chol = np.linalg.cholesky(cov)
    thetas = np.asarray(mean) + rng.standard_normal((num_samples, len(mean))) @ chol.T
    values = softmax_probs_flat(thetas, x)[:, f - 1]
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(num_samples))


def sample_mixture(weights, means, covs, num_samples: int, rng):
    """Draws from a Gaussian mixture given per-component arrays."""
    weights = np.asarray(weights, dtype=float)
    counts = rng.multinomial(num_samples, weights / weights.sum())
    draws = []
    for count, mean, cov in zip(counts, means, covs):
        if count == 0:
            continue
        chol = np.linalg.cholesky(cov)
        draws.append(np.asarray(mean) + rng.standard_normal((count, len(mean))) @ chol.T)
    out = np.concatenate(draws, axis=0)
    return out[rng.permutation(out.shape[0])]


def efe_monte_carlo(weights, means, covs, x, p_ev, num_samples: int, rng):
    """Brute-force expected-free-energy estimate.

    Samples the mixture belief, evaluates the exact softmax likelihood of
    every outcome, estimates the predictive q(o) from the same samples, and
    averages sum_o p(o|theta) log[q(o) / (p_ev(o) p(o|theta))].
    Returns (estimate, standard error).
    """
    thetas = sample_mixture(weights, means, covs, num_samples, rng)
    probs = softmax_probs_flat(thetas, x)
    q = probs.mean(axis=0)
    log_ratio = np.log(q)[None, :] - np.log(np.asarray(p_ev, dtype=float))[None, :] - np.log(probs)
    per_sample = (probs * log_ratio).sum(axis=1)
    return float(per_sample.mean()), float(per_sample.std(ddof=1) / np.sqrt(num_samples))


def gaussian_pdf_grid(mean, cov, grid_axes):
    """Exact Gaussian pdf evaluated on a meshgrid built from grid_axes."""
    mesh = np.meshgrid(*grid_axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    d = len(grid_axes)
    chol = np.linalg.cholesky(cov)
    diff = pts - np.asarray(mean)
    y = np.linalg.solve(chol, diff.T)
    norm = (2 * np.pi) ** (d / 2) * np.prod(np.diag(chol))
    vals = np.exp(-0.5 * (y**2).sum(axis=0)) / norm
    return vals.reshape(mesh[0].shape)


def trapz_nd(values, grid_axes):
    out = values
    for axis_vals in reversed(grid_axes):
        out = np.trapezoid(out, axis_vals, axis=-1)
    return float(out)


def psda_pdf_grid(weights, means, covs, x, f, fp_rate, grid_axes):
    """Grid evaluation of the robust-fusion posterior density.

    Builds the exact per-point prior mixture and softmax likelihood, the
    quadrature-normalized exact posterior, the exact association weights,
    and returns gamma0 * prior + gamma1 * posterior on the grid.
    """
    mesh = np.meshgrid(*grid_axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    prior = np.zeros(pts.shape[0])
    for w, mean, cov in zip(weights, means, covs):
        prior += w * gaussian_pdf_grid(mean, cov, grid_axes).ravel()
    prior = prior.reshape(mesh[0].shape)
    num_labels = len(np.asarray(means[0])) // len(x)
    lik = softmax_probs_flat(pts, x)[:, f - 1].reshape(mesh[0].shape)
    joint = prior * lik
    lam = trapz_nd(joint, grid_axes)
    posterior = joint / lam
    wrong = fp_rate / num_labels
    right = (1.0 - fp_rate) * lam
    gamma0 = wrong / (wrong + right)
    gamma1 = right / (wrong + right)
    return gamma0 * prior + gamma1 * posterior, gamma0, gamma1, lam


def ucb1_reference(reward_sequences, horizon):
    """Hand-rolled UCB1 selection sequence on pre-drawn per-option rewards.

    reward_sequences[k] is consumed in order each time option k is pulled.
    Options and steps are 0-based here; returns the list of selections.
    """
    num_options = len(reward_sequences)
    counts = [0] * num_options
    sums = [0.0] * num_options
    cursor = [0] * num_options
    picks = []
    for t in range(horizon):
        untried = [k for k in range(num_options) if counts[k] == 0]
        if untried:
            k = untried[0]
        else:
            scores = [
                sums[k] / counts[k] + np.sqrt(2.0 * np.log(t) / counts[k])
                for k in range(num_options)
            ]
            k = int(np.argmax(scores))
        reward = reward_sequences[k][cursor[k]]
        cursor[k] += 1
        counts[k] += 1
        sums[k] += reward
        picks.append(k)
    return picks
