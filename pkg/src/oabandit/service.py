"""HTTP session service: exposes a live episode so a person can play the
external information source.

The simulated episode loop runs on demand via the advance endpoint; instead
of a simulated observer, downlink steps enqueue pending requests that a
human answers by posting a label, which is fused robustly at submission
time. State is polled; there is no push channel.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .efe import EfeScore, EvolutionaryPrior
from .episode import audit_record, init_belief
from .fusion import FusionConfig, naive_update, psda_update
from .gaussmix import ParameterBelief
from .model import ContextBundle, EnvironmentTruth, generate_environment, sample_outcome
from .policies import AifPolicy, PolicyState, make_policy, plugin_success_prob

__all__ = ["SessionConfig", "Session", "create_app", "replay_audit"]

_MAX_ADVANCE = 10_000


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


@dataclass(frozen=True)
class SessionConfig:
    k: int = 5
    c: int = 3
    f: int = 4
    f_p: int = 1
    fp_rate: float = 0.4
    policy: str = "aif"
    seed: int = 0
    downlink_interval: int = 4
    uplink_delay: int = 2
    epsilon: float = 0.25
    p_ev_preferred: float = 1.0
    p_ev_nonpreferred: float = 0.01
    reduction_threshold: int = 10
    prior_mean: float = 0.5
    prior_var: float = 1.0

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ApiError(400, "unknown_config_key",
                           f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise ApiError(400, "bad_config", str(exc)) from exc

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass
class PendingDownlink:
    option: int
    emitted_step: int

    def to_dict(self) -> dict:
        return {"option": self.option, "emitted_step": self.emitted_step}


@dataclass
class Session:
    """One live episode. All mutation goes through advance/submit under the
    owning app's per-session lock."""

    id: str
    config: SessionConfig
    env: EnvironmentTruth
    beliefs: list[ParameterBelief]
    policy: object
    policy_rng: np.random.Generator
    internal_rng: np.random.Generator
    state: PolicyState
    step: int = 0
    pending: list[PendingDownlink] = field(default_factory=list)
    audit: list[dict] = field(default_factory=list)
    regret: list[float] = field(default_factory=list)
    _scorer: AifPolicy | None = None

    @classmethod
    def create(cls, config: SessionConfig) -> "Session":
        try:
            env = generate_environment(config.k, config.c, config.f, config.f_p,
                                       seed=config.seed)
            policy = make_policy(
                config.policy, env, epsilon=config.epsilon,
                ev=_evolutionary_prior(config),
            )
            beliefs = init_belief(config.k, config.c, config.f,
                                  config.prior_mean, config.prior_var)
        except ValueError as exc:
            raise ApiError(400, "bad_config", str(exc)) from exc
        ss = np.random.SeedSequence(config.seed)
        internal_rng, _, policy_rng = map(np.random.default_rng, ss.spawn(3))
        return cls(
            id=uuid.uuid4().hex[:12],
            config=config,
            env=env,
            beliefs=beliefs,
            policy=policy,
            policy_rng=policy_rng,
            internal_rng=internal_rng,
            state=PolicyState(config.k),
        )

    @property
    def fusion_config(self) -> FusionConfig:
        return FusionConfig(self.config.fp_rate, self.config.f,
                            self.config.reduction_threshold)

    def advance(self, steps: int) -> None:
        if steps < 1 or steps > _MAX_ADVANCE:
            raise ApiError(400, "bad_steps",
                           f"steps must lie in 1..{_MAX_ADVANCE}")
        for _ in range(steps):
            self.step += 1
            k = self.policy.select(self.beliefs, self.env.contexts, self.state,
                                   self.policy_rng)
            x = self.env.contexts.effective(k)
            label = sample_outcome(self.env.theta_true[k - 1], x, self.internal_rng)
            reward = int(label == self.env.preferred_label)
            before = self.beliefs[k - 1].num_components
            outcome = naive_update(self.beliefs[k - 1], label, x)
            self.beliefs[k - 1] = outcome.belief
            self.audit.append(
                audit_record(self.step, k, "internal", label, outcome, before)
            )
            self.state.record(k, reward)
            inst = self.env.psi_star - float(self.env.psi[k - 1])
            self.regret.append((self.regret[-1] if self.regret else 0.0) + inst)
            if self.step % self.config.downlink_interval == 0:
                self.pending.append(PendingDownlink(option=k, emitted_step=self.step))

    def submit_observation(self, option, label) -> dict:
        if not isinstance(option, int) or not 1 <= option <= self.config.k:
            raise ApiError(400, "option_out_of_range",
                           f"option must lie in 1..{self.config.k}")
        if not isinstance(label, int) or not 1 <= label <= self.config.f:
            raise ApiError(400, "label_out_of_range",
                           f"label must lie in 1..{self.config.f}")
        match = next((p for p in self.pending if p.option == option), None)
        if match is None:
            raise ApiError(409, "not_pending",
                           f"option {option} has no pending downlink")
        self.pending.remove(match)
        x = self.env.contexts.effective(option)
        before = self.beliefs[option - 1].num_components
        outcome = psda_update(self.beliefs[option - 1], label, x, self.fusion_config)
        self.beliefs[option - 1] = outcome.belief
        self.audit.append(
            audit_record(self.step, option, "external", label, outcome, before)
        )
        return {"gamma0": outcome.assoc.gamma0, "gamma1": outcome.assoc.gamma1}

    def efe_scores(self) -> list[EfeScore]:
        if self._scorer is None:
            self._scorer = AifPolicy(_evolutionary_prior(self.config))
        return self._scorer.score(self.beliefs, self.env.contexts)

    def state_doc(self) -> dict:
        return {
            "id": self.id,
            "step": self.step,
            "config": self.config.to_dict(),
            "contexts": {
                "x_shared": self.env.contexts.shared.tolist(),
                "x_per_option": [v.tolist() for v in self.env.contexts.per_option],
            },
            "options": [
                {
                    "option": k,
                    "success_prob": plugin_success_prob(
                        b, self.env.contexts, k, self.env.preferred_label
                    ),
                    "components": b.num_components,
                }
                for k, b in enumerate(self.beliefs, start=1)
            ],
            "efe": [s.as_dict() for s in self.efe_scores()],
            "regret": list(self.regret),
            "pending": [p.to_dict() for p in self.pending],
            "observations": list(self.audit),
            "beliefs": [json.loads(b.to_json()) for b in self.beliefs],
        }


def _evolutionary_prior(config: SessionConfig):
    return EvolutionaryPrior.peaked(config.f, config.f_p,
                                    config.p_ev_preferred,
                                    config.p_ev_nonpreferred)


def replay_audit(config: SessionConfig, audit: list[dict],
                 contexts_doc: dict) -> list[ParameterBelief]:
    """Re-derive beliefs by replaying an audit log offline; used to verify a
    session's state against the recorded operation sequence."""
    contexts = ContextBundle(
        shared=np.array(contexts_doc["x_shared"]),
        per_option=tuple(np.array(v) for v in contexts_doc["x_per_option"]),
    )
    beliefs = init_belief(config.k, config.c, config.f,
                          config.prior_mean, config.prior_var)
    cfg = FusionConfig(config.fp_rate, config.f, config.reduction_threshold)
    for rec in audit:
        k, label = rec["option"], rec["label"]
        x = contexts.effective(k)
        if rec["source"] == "internal":
            beliefs[k - 1] = naive_update(beliefs[k - 1], label, x).belief
        else:
            beliefs[k - 1] = psda_update(beliefs[k - 1], label, x, cfg).belief
    return beliefs


def create_app() -> FastAPI:
    app = FastAPI(title="oabandit session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, Session] = {}
    locks: dict[str, threading.Lock] = {}
    store_lock = threading.Lock()

    def get_session(session_id: str) -> tuple[Session, threading.Lock]:
        with store_lock:
            if session_id not in sessions:
                raise ApiError(404, "unknown_session",
                               f"no session {session_id!r}")
            return sessions[session_id], locks[session_id]

    @app.exception_handler(ApiError)
    async def handle_api_error(_: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"error": str(exc), "code": exc.code})

    @app.post("/sessions")
    def create_session(body: dict | None = None):
        config = SessionConfig.from_dict(body or {})
        session = Session.create(config)
        with store_lock:
            sessions[session.id] = session
            locks[session.id] = threading.Lock()
        return {"id": session.id}

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str):
        session, lock = get_session(session_id)
        with lock:
            return session.state_doc()

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str, body: dict):
        steps = body.get("steps")
        if not isinstance(steps, int):
            raise ApiError(400, "bad_steps", 'body must carry integer "steps"')
        session, lock = get_session(session_id)
        with lock:
            session.advance(steps)
            return session.state_doc()

    @app.get("/sessions/{session_id}/pending")
    def list_pending(session_id: str):
        session, lock = get_session(session_id)
        with lock:
            return {"pending": [p.to_dict() for p in session.pending]}

    @app.post("/sessions/{session_id}/observations")
    def submit_observation(session_id: str, body: dict):
        session, lock = get_session(session_id)
        option, label = body.get("option"), body.get("label")
        with lock:
            return session.submit_observation(option, label)

    @app.get("/sessions/{session_id}/efe")
    def get_efe(session_id: str):
        session, lock = get_session(session_id)
        with lock:
            return {"efe": [s.as_dict() for s in session.efe_scores()]}

    return app


app = create_app()
