"""Episode engine: plays one bandit episode with internal observations,
an optional simulated external observer on a delayed downlink/uplink
schedule, and regret accounting against the ground truth."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fusion import FusionConfig, UpdateOutcome, naive_update, psda_update
from .gaussmix import GaussianComponent, ParameterBelief, mixture_mean
from .model import EnvironmentTruth, sample_outcome
from .policies import Policy, PolicyState

__all__ = [
    "CommSchedule",
    "SemanticObservation",
    "StepRecord",
    "EpisodeTrajectory",
    "FUSION_MODES",
    "human_observe",
    "init_belief",
    "run_episode",
    "cumulative_regret",
]

FUSION_MODES = ("no_human", "naive", "psda")

TRAJECTORY_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CommSchedule:
    """Downlink every `downlink_interval` steps; the external label for a
    downlink arrives `uplink_delay` steps later."""

    downlink_interval: int = 4
    uplink_delay: int = 2

    def __post_init__(self):
        if self.downlink_interval < 1:
            raise ValueError("downlink interval must be >= 1")
        if not 0 <= self.uplink_delay < self.downlink_interval:
            raise ValueError("uplink delay must satisfy 0 <= delay < interval")


@dataclass(frozen=True)
class SemanticObservation:
    """One categorical label about one option.

    truth_flag records whether the simulator generated the label from the
    true outcome distribution (1) or uniformly at random (0). It exists only
    for simulator-side diagnostics and is excluded from every agent-facing
    record.
    """

    option: int
    label: int
    source: str  # "internal" | "external"
    emitted_step: int
    arrival_step: int
    truth_flag: int = 1

    def __post_init__(self):
        if self.arrival_step < self.emitted_step:
            raise ValueError("observation cannot arrive before it was emitted")
        if self.source == "internal" and (
            self.arrival_step != self.emitted_step or self.truth_flag != 1
        ):
            raise ValueError("internal observations are immediate and trusted")

    def agent_view(self) -> dict:
        return {
            "option": self.option,
            "label": self.label,
            "source": self.source,
            "emitted_step": self.emitted_step,
            "arrival_step": self.arrival_step,
        }


@dataclass(frozen=True)
class StepRecord:
    step: int
    option: int
    internal_label: int
    reward: int
    fused_external: tuple[dict, ...]
    regret_inst: float
    regret_cum: float
    belief_error: float


@dataclass
class EpisodeTrajectory:
    fusion_mode: str
    steps: list[StepRecord] = field(default_factory=list)
    audit: list[dict] = field(default_factory=list)
    final_beliefs: list[ParameterBelief] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.steps)

    def regret_curve(self) -> np.ndarray:
        return np.array([s.regret_cum for s in self.steps])

    def belief_error_curve(self) -> np.ndarray:
        return np.array([s.belief_error for s in self.steps])

    def selections(self) -> list[int]:
        return [s.option for s in self.steps]

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for s in self.steps:
                rec = {
                    "schema_version": TRAJECTORY_SCHEMA_VERSION,
                    "type": "step",
                    "step": s.step,
                    "option": s.option,
                    "internal_label": s.internal_label,
                    "reward": s.reward,
                    "fused_external": list(s.fused_external),
                    "regret_inst": s.regret_inst,
                    "regret_cum": s.regret_cum,
                    "belief_error": s.belief_error,
                }
                fh.write(json.dumps(rec) + "\n")
            fh.write(
                json.dumps(
                    {
                        "schema_version": TRAJECTORY_SCHEMA_VERSION,
                        "type": "final",
                        "fusion_mode": self.fusion_mode,
                        "beliefs": [json.loads(b.to_json()) for b in self.final_beliefs],
                    }
                )
                + "\n"
            )

    def audit_to_jsonl(self, path) -> None:
        """One belief-update audit record per line, in fusion order."""
        with open(path, "w") as fh:
            for rec in self.audit:
                fh.write(json.dumps(rec) + "\n")


def human_observe(
    env: EnvironmentTruth,
    k: int,
    fp_rate: float,
    rng: np.random.Generator,
    emitted_step: int,
    schedule: CommSchedule,
) -> SemanticObservation:
    """Simulated external observer: with probability fp_rate the label is
    uniform over all labels, otherwise an independent draw from option k's
    true outcome distribution."""
    if not 0.0 <= fp_rate <= 1.0:
        raise ValueError("fp_rate must lie in [0, 1]")
    faulty = rng.random() < fp_rate
    if faulty:
        label = int(rng.integers(1, env.num_labels + 1))
    else:
        label = sample_outcome(env.theta_true[k - 1], env.contexts.effective(k), rng)
    return SemanticObservation(
        option=k,
        label=label,
        source="external",
        emitted_step=emitted_step,
        arrival_step=emitted_step + schedule.uplink_delay,
        truth_flag=0 if faulty else 1,
    )


def init_belief(
    num_options: int,
    context_dim: int,
    num_labels: int,
    prior_mean: float = 0.5,
    prior_var: float = 1.0,
) -> list[ParameterBelief]:
    """One single-mixand Gaussian per option; the default mean matches the
    first moment of the Uniform(0,1) ground-truth parameter distribution."""
    if prior_var <= 0:
        raise ValueError("prior variance must be positive")
    d = context_dim * num_labels
    return [
        ParameterBelief(
            components=(
                GaussianComponent(
                    mean=np.full(d, prior_mean),
                    cov=prior_var * np.eye(d),
                    log_weight=0.0,
                ),
            ),
            option=k,
        )
        for k in range(1, num_options + 1)
    ]


def audit_record(step: int, k: int, source: str, label: int, outcome: UpdateOutcome,
                  components_before: int) -> dict:
    return {
        "step": step,
        "option": k,
        "source": source,
        "label": label,
        "gamma0": outcome.assoc.gamma0 if outcome.assoc else None,
        "gamma1": outcome.assoc.gamma1 if outcome.assoc else None,
        "lambda": outcome.lam,
        "components_before": components_before,
        "components_after": outcome.belief.num_components,
    }


def _belief_error(beliefs: list[ParameterBelief], env: EnvironmentTruth) -> float:
    errs = [
        np.linalg.norm(mixture_mean(b) - env.flat_truth(k))
        for k, b in enumerate(beliefs, start=1)
    ]
    return float(np.mean(errs))


def run_episode(
    env: EnvironmentTruth,
    policy: Policy,
    fusion_mode: str,
    schedule: CommSchedule,
    horizon: int,
    seed,
    *,
    fp_rate: float = 0.0,
    assumed_fp_rate: float | None = None,
    reduction_threshold: int = 10,
    prior_mean: float = 0.5,
    prior_var: float = 1.0,
    initial_beliefs: list[ParameterBelief] | None = None,
) -> EpisodeTrajectory:
    """Play `horizon` steps and return the full trajectory.

    Per step: fuse any external observation arriving now, select an option,
    observe and fuse the internal label, then account reward and regret. On
    downlink steps (and unless fusion_mode is "no_human") the simulated
    observer comments on the option selected at that step; comments that
    would arrive after the horizon are dropped.

    Three independent random streams (internal labels, external observer,
    policy) are derived from the seed, so trajectories with the same seed
    and selections share internal observations across fusion modes.
    """
    if fusion_mode not in FUSION_MODES:
        raise ValueError(f"fusion_mode must be one of {FUSION_MODES}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    ss = np.random.SeedSequence(seed)
    internal_rng, human_rng, policy_rng = map(np.random.default_rng, ss.spawn(3))

    cfg = FusionConfig(
        fp_rate=fp_rate if assumed_fp_rate is None else assumed_fp_rate,
        label_count=env.num_labels,
        reduction_threshold=reduction_threshold,
    )
    if initial_beliefs is None:
        beliefs = init_belief(env.num_options, env.context_dim, env.num_labels,
                              prior_mean, prior_var)
    else:
        if len(initial_beliefs) != env.num_options:
            raise ValueError("one initial belief per option required")
        beliefs = list(initial_beliefs)
    state = PolicyState(env.num_options)
    trajectory = EpisodeTrajectory(fusion_mode=fusion_mode)
    in_flight: dict[int, list[SemanticObservation]] = {}
    regret_cum = 0.0

    for t in range(1, horizon + 1):
        fused_now = []
        for obs in in_flight.pop(t, []):
            k = obs.option
            x = env.contexts.effective(k)
            before = beliefs[k - 1].num_components
            if fusion_mode == "psda":
                outcome = psda_update(beliefs[k - 1], obs.label, x, cfg)
            else:
                outcome = naive_update(beliefs[k - 1], obs.label, x)
            beliefs[k - 1] = outcome.belief
            trajectory.audit.append(
                audit_record(t, k, "external", obs.label, outcome, before)
            )
            view = obs.agent_view()
            view["gamma0"] = outcome.assoc.gamma0 if outcome.assoc else None
            view["gamma1"] = outcome.assoc.gamma1 if outcome.assoc else None
            fused_now.append(view)

        k = policy.select(beliefs, env.contexts, state, policy_rng)
        x = env.contexts.effective(k)
        label = sample_outcome(env.theta_true[k - 1], x, internal_rng)
        reward = int(label == env.preferred_label)
        before = beliefs[k - 1].num_components
        outcome = naive_update(beliefs[k - 1], label, x)
        beliefs[k - 1] = outcome.belief
        trajectory.audit.append(audit_record(t, k, "internal", label, outcome, before))
        state.record(k, reward)

        regret_inst = env.psi_star - float(env.psi[k - 1])
        regret_cum += regret_inst
        trajectory.steps.append(
            StepRecord(
                step=t,
                option=k,
                internal_label=label,
                reward=reward,
                fused_external=tuple(fused_now),
                regret_inst=regret_inst,
                regret_cum=regret_cum,
                belief_error=_belief_error(beliefs, env),
            )
        )

        if fusion_mode != "no_human" and t % schedule.downlink_interval == 0:
            obs = human_observe(env, k, fp_rate, human_rng, t, schedule)
            if obs.arrival_step <= horizon:
                in_flight.setdefault(obs.arrival_step, []).append(obs)

    trajectory.final_beliefs = beliefs
    return trajectory


def cumulative_regret(trajectory: EpisodeTrajectory, env: EnvironmentTruth) -> np.ndarray:
    """Regret series recomputed from pull counts and true success
    probabilities, independent of realized rewards."""
    counts = np.zeros(env.num_options)
    series = np.empty(trajectory.horizon)
    for i, step in enumerate(trajectory.steps):
        counts[step.option - 1] += 1
        series[i] = (i + 1) * env.psi_star - float(counts @ env.psi)
    return series
