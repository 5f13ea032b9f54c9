"""Softmax outcome model, context vectors, and ground-truth environment generation.

Conventions used throughout the package:
  * options k and outcome labels f are 1-based in every public interface;
  * per-option parameters are C x F matrices (rows = context features,
    columns = labels) and flatten to length d = C*F in column-major
    label-block order (all C entries of label 1, then label 2, ...).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ContextBundle",
    "ParameterMatrix",
    "EnvironmentTruth",
    "softmax_distribution",
    "softmax_likelihood",
    "sample_outcome",
    "generate_environment",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ContextBundle:
    """Option-agnostic context plus one option-specific context per option.

    The context an option's outcome actually depends on is the elementwise
    sum of the shared vector and that option's own vector.
    """

    shared: np.ndarray
    per_option: tuple[np.ndarray, ...]

    def __post_init__(self):
        shared = _readonly(np.atleast_1d(self.shared))
        per = tuple(_readonly(np.atleast_1d(v)) for v in self.per_option)
        if shared.ndim != 1 or shared.size < 1:
            raise ValueError("shared context must be a vector of length >= 1")
        if len(per) < 2:
            raise ValueError("need at least two options")
        for v in per:
            if v.shape != shared.shape:
                raise ValueError("all context vectors must share one length")
        object.__setattr__(self, "shared", shared)
        object.__setattr__(self, "per_option", per)

    @property
    def dim(self) -> int:
        return self.shared.size

    @property
    def num_options(self) -> int:
        return len(self.per_option)

    def effective(self, k: int) -> np.ndarray:
        """Combined context for option k (1-based)."""
        if not 1 <= k <= self.num_options:
            raise ValueError(f"option {k} out of range 1..{self.num_options}")
        return self.shared + self.per_option[k - 1]


@dataclass(frozen=True)
class ParameterMatrix:
    """C x F weight matrix mapping a context vector to per-label logits."""

    entries: np.ndarray

    def __post_init__(self):
        entries = _readonly(np.atleast_2d(self.entries))
        if entries.ndim != 2:
            raise ValueError("entries must be a 2-D matrix")
        if not np.all(np.isfinite(entries)):
            raise ValueError("entries must be finite")
        object.__setattr__(self, "entries", entries)

    @property
    def context_dim(self) -> int:
        return self.entries.shape[0]

    @property
    def num_labels(self) -> int:
        return self.entries.shape[1]

    def flatten(self) -> np.ndarray:
        """Length-d vector in column-major label-block order."""
        return self.entries.flatten(order="F")

    @classmethod
    def from_flat(cls, vec: np.ndarray, context_dim: int, num_labels: int) -> "ParameterMatrix":
        vec = np.asarray(vec, dtype=float)
        if vec.size != context_dim * num_labels:
            raise ValueError(
                f"flat vector of size {vec.size} does not match {context_dim}x{num_labels}"
            )
        return cls(vec.reshape((context_dim, num_labels), order="F"))


def _logits(theta: ParameterMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (theta.context_dim,):
        raise ValueError(
            f"context of length {x.size} does not match C={theta.context_dim}"
        )
    return theta.entries.T @ x


def softmax_distribution(theta: ParameterMatrix, x: np.ndarray) -> np.ndarray:
    """All F outcome probabilities exp(theta_f.x) / sum_h exp(theta_h.x).

    Max-logit subtraction keeps the exponentials bounded by 1.
    """
    z = _logits(theta, x)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_likelihood(theta: ParameterMatrix, f: int, x: np.ndarray) -> float:
    """Probability of observing label f (1-based) under the softmax model."""
    if not 1 <= f <= theta.num_labels:
        raise ValueError(f"label {f} out of range 1..{theta.num_labels}")
    return float(softmax_distribution(theta, x)[f - 1])


def sample_outcome(theta: ParameterMatrix, x: np.ndarray, rng: np.random.Generator) -> int:
    """Draw a 1-based label from the softmax outcome distribution."""
    p = softmax_distribution(theta, x)
    return int(rng.choice(theta.num_labels, p=p)) + 1


@dataclass(frozen=True)
class EnvironmentTruth:
    """Ground truth for one simulated environment: hidden parameters,
    contexts, and the resulting per-option success probabilities."""

    num_options: int
    context_dim: int
    num_labels: int
    theta_true: tuple[ParameterMatrix, ...]
    contexts: ContextBundle
    preferred_label: int
    psi: np.ndarray = field(init=False)
    psi_star: float = field(init=False)

    def __post_init__(self):
        if len(self.theta_true) != self.num_options:
            raise ValueError("one parameter matrix per option required")
        if not 1 <= self.preferred_label <= self.num_labels:
            raise ValueError("preferred label out of range")
        psi = np.array(
            [
                softmax_likelihood(self.theta_true[k - 1], self.preferred_label, self.contexts.effective(k))
                for k in range(1, self.num_options + 1)
            ]
        )
        object.__setattr__(self, "psi", _readonly(psi))
        object.__setattr__(self, "psi_star", float(psi.max()))

    @property
    def flat_dim(self) -> int:
        return self.context_dim * self.num_labels

    def flat_truth(self, k: int) -> np.ndarray:
        """Flattened true parameters of option k (1-based)."""
        return self.theta_true[k - 1].flatten()

    def to_json(self) -> str:
        doc = {
            "k": self.num_options,
            "c": self.context_dim,
            "f": self.num_labels,
            "f_p": self.preferred_label,
            "theta_true": [t.entries.tolist() for t in self.theta_true],
            "x_shared": self.contexts.shared.tolist(),
            "x_per_option": [v.tolist() for v in self.contexts.per_option],
            "psi": self.psi.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "EnvironmentTruth":
        doc = json.loads(text)
        contexts = ContextBundle(
            shared=np.array(doc["x_shared"]),
            per_option=tuple(np.array(v) for v in doc["x_per_option"]),
        )
        truth = cls(
            num_options=doc["k"],
            context_dim=doc["c"],
            num_labels=doc["f"],
            theta_true=tuple(ParameterMatrix(np.array(t)) for t in doc["theta_true"]),
            contexts=contexts,
            preferred_label=doc["f_p"],
        )
        stored = np.array(doc["psi"])
        if not np.allclose(stored, truth.psi, rtol=0, atol=1e-12):
            raise ValueError("stored psi inconsistent with theta_true and contexts")
        return truth


def generate_environment(
    num_options: int,
    context_dim: int,
    num_labels: int,
    preferred_label: int,
    seed: int,
) -> EnvironmentTruth:
    """Random environment: Uniform(0,1) parameter entries, Bernoulli(0.5)
    binary context elements. Deterministic in the seed."""
    if num_options < 2 or context_dim < 1 or num_labels < 2:
        raise ValueError("need K >= 2, C >= 1, F >= 2")
    if not 1 <= preferred_label <= num_labels:
        raise ValueError("preferred label out of range")
    rng = np.random.default_rng(seed)
    theta = tuple(
        ParameterMatrix(rng.uniform(0.0, 1.0, size=(context_dim, num_labels)))
        for _ in range(num_options)
    )
    shared = rng.integers(0, 2, size=context_dim).astype(float)
    per_option = tuple(
        rng.integers(0, 2, size=context_dim).astype(float) for _ in range(num_options)
    )
    return EnvironmentTruth(
        num_options=num_options,
        context_dim=context_dim,
        num_labels=num_labels,
        theta_true=theta,
        contexts=ContextBundle(shared=shared, per_option=per_option),
        preferred_label=preferred_label,
    )
