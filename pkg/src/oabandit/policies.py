"""Option-selection strategies: oracle, epsilon-greedy, UCB1, Thompson
sampling, and active inference (expected-free-energy minimization)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .efe import EfeScore, EvolutionaryPrior, efe
from .gaussmix import ParameterBelief, mixture_mean
from .model import ContextBundle, EnvironmentTruth, ParameterMatrix, softmax_likelihood

__all__ = [
    "PolicyState",
    "plugin_success_prob",
    "Policy",
    "OraclePolicy",
    "EpsilonGreedyPolicy",
    "UcbPolicy",
    "ThompsonPolicy",
    "AifPolicy",
    "make_policy",
]

DEFAULT_EPSILON = 0.25


@dataclass
class PolicyState:
    """Per-episode pull counts and reward sums, shared by all policies."""

    num_options: int
    t: int = 0
    counts: np.ndarray = field(init=False)
    reward_sums: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.zeros(self.num_options, dtype=int)
        self.reward_sums = np.zeros(self.num_options, dtype=float)

    def record(self, k: int, reward: float) -> None:
        self.counts[k - 1] += 1
        self.reward_sums[k - 1] += reward
        self.t += 1


def plugin_success_prob(
    belief: ParameterBelief, contexts: ContextBundle, k: int, preferred_label: int
) -> float:
    """Success probability at the belief's mixture mean."""
    c = contexts.dim
    theta = ParameterMatrix.from_flat(mixture_mean(belief), c, belief.dim // c)
    return softmax_likelihood(theta, preferred_label, contexts.effective(k))


class Policy:
    """Selects a 1-based option given current beliefs and contexts."""

    name = "base"

    def select(
        self,
        beliefs: list[ParameterBelief],
        contexts: ContextBundle,
        state: PolicyState,
        rng: np.random.Generator,
    ) -> int:
        raise NotImplementedError


class OraclePolicy(Policy):
    """Always the truly best option; its regret is identically zero."""

    name = "oracle"

    def __init__(self, env: EnvironmentTruth):
        self._best = int(np.argmax(env.psi)) + 1

    def select(self, beliefs, contexts, state, rng) -> int:
        return self._best


class EpsilonGreedyPolicy(Policy):
    name = "egreedy"

    def __init__(self, preferred_label: int, epsilon: float = DEFAULT_EPSILON):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self.preferred_label = preferred_label
        self.epsilon = epsilon

    def select(self, beliefs, contexts, state, rng) -> int:
        if rng.random() < self.epsilon:
            return int(rng.integers(1, len(beliefs) + 1))
        scores = [
            plugin_success_prob(b, contexts, k, self.preferred_label)
            for k, b in enumerate(beliefs, start=1)
        ]
        return int(np.argmax(scores)) + 1


class UcbPolicy(Policy):
    """UCB1 on the binary preferred-outcome reward."""

    name = "ucb"

    def select(self, beliefs, contexts, state, rng) -> int:
        unvisited = np.flatnonzero(state.counts == 0)
        if unvisited.size:
            return int(unvisited[0]) + 1
        means = state.reward_sums / state.counts
        bonus = np.sqrt(2.0 * np.log(state.t) / state.counts)
        return int(np.argmax(means + bonus)) + 1


class ThompsonPolicy(Policy):
    """One posterior parameter draw per option; pick the draw that makes the
    preferred outcome most likely."""

    name = "ts"

    def __init__(self, preferred_label: int):
        self.preferred_label = preferred_label

    def select(self, beliefs, contexts, state, rng) -> int:
        c = contexts.dim
        scores = []
        for k, belief in enumerate(beliefs, start=1):
            u = int(rng.choice(belief.num_components, p=belief.weights))
            draw = belief.components[u].sample(rng)
            theta = ParameterMatrix.from_flat(draw, c, belief.dim // c)
            scores.append(
                softmax_likelihood(theta, self.preferred_label, contexts.effective(k))
            )
        return int(np.argmax(scores)) + 1


class AifPolicy(Policy):
    """Minimizes expected free energy against an outcome preference.

    Scores are cached per option and recomputed only when that option's
    belief object changes; beliefs are immutable so identity is a safe key.
    The scores from the latest selection are kept for auditing.
    """

    name = "aif"

    def __init__(self, ev: EvolutionaryPrior):
        self.ev = ev
        self.last_scores: list[EfeScore] = []
        self._cache: dict[int, tuple[ParameterBelief, EfeScore]] = {}

    def score(self, beliefs, contexts) -> list[EfeScore]:
        scores = []
        for k, belief in enumerate(beliefs, start=1):
            cached = self._cache.get(k)
            if cached is not None and cached[0] is belief:
                scores.append(cached[1])
                continue
            s = efe(belief, contexts.effective(k), self.ev)
            if s.option is None:
                s = EfeScore(option=k, total=s.total, per_outcome=s.per_outcome)
            self._cache[k] = (belief, s)
            scores.append(s)
        return scores

    def select(self, beliefs, contexts, state, rng) -> int:
        scores = self.score(beliefs, contexts)
        self.last_scores = scores
        return int(np.argmin([s.total for s in scores])) + 1


def make_policy(
    kind: str,
    env: EnvironmentTruth,
    *,
    epsilon: float = DEFAULT_EPSILON,
    ev: EvolutionaryPrior | None = None,
) -> Policy:
    if kind == "oracle":
        return OraclePolicy(env)
    if kind == "egreedy":
        return EpsilonGreedyPolicy(env.preferred_label, epsilon)
    if kind == "ucb":
        return UcbPolicy()
    if kind == "ts":
        return ThompsonPolicy(env.preferred_label)
    if kind == "aif":
        if ev is None:
            ev = EvolutionaryPrior.peaked(env.num_labels, env.preferred_label)
        return AifPolicy(ev)
    raise ValueError(f"unknown policy kind {kind!r}")
