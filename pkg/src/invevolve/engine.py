"""Certified champion search within one deployment period.

The loop keeps an ordered pool of canonical, structurally valid policies.
Every member is scored against the reference policy on common replay paths;
candidates are promoted only when their lower confidence bound clears the
safety budget xi against the reference and epsilon + xi against the current
champion. At the end the policy with the largest upper bound among those
certified safe is deployed, or the reference if none is.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .policies import PolicySpec, canonicalize, check_validity
from .replay import METHODS, ConfidenceBound, GainSamples, confidence_bound, evaluation_budget

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class ProposalsExhausted(Exception):
    """Raised by a proposal source that has nothing left to offer."""


class ReplayContext(Protocol):
    lead_time: int

    def path_costs(self, policy: PolicySpec) -> np.ndarray:
        """Per-path replay costs of ``policy`` on the shared sample paths."""


@dataclass(frozen=True)
class EpochConfig:
    J: int = 60
    epsilon: float = 0.05
    delta: float = 0.05
    xi: float = 0.0
    cert_method: str = "blockwise_t"
    seed: int = 0
    gain_bound: float | None = None

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ConfigError("J must be a positive integer")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0,1)")
        if self.xi < 0:
            raise ConfigError("xi must be non-negative")
        if self.cert_method not in METHODS:
            raise ConfigError(f"cert_method must be one of {METHODS}")
        if self.gain_bound is not None and not self.gain_bound > 0:
            raise ConfigError("gain_bound must be positive")

    def to_json(self) -> dict:
        return {
            "J": self.J, "epsilon": self.epsilon, "delta": self.delta, "xi": self.xi,
            "cert_method": self.cert_method, "seed": self.seed, "gain_bound": self.gain_bound,
        }


@dataclass(frozen=True)
class GateDecision:
    round: int
    candidate: PolicySpec | None
    S_score: float | None = None
    I_score: float | None = None
    O_score: float | None = None
    safety_pass: bool = False
    improvement_pass: bool = False
    promoted: bool = False
    status: str = "evaluated"
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "candidate": self.candidate.to_json() if self.candidate is not None else None,
            "S_score": self.S_score, "I_score": self.I_score, "O_score": self.O_score,
            "safety_pass": self.safety_pass, "improvement_pass": self.improvement_pass,
            "promoted": self.promoted, "status": self.status, "reason": self.reason,
        }


@dataclass
class EpochState:
    reference: PolicySpec
    champion: PolicySpec
    pool: dict = field(default_factory=dict)  # canonical key -> spec, insertion ordered
    round: int = 0
    evaluations_used: int = 0
    budget: int = 0
    stats: dict = field(default_factory=dict)  # (candidate key, comparator key) -> ConfidenceBound
    decisions: list = field(default_factory=list)
    champion_path: list = field(default_factory=list)
    initial_pool: list = field(default_factory=list)
    initial_feasible: list = field(default_factory=list)
    bound_observed: bool = False
    evaluator: object = field(default=None, repr=False, compare=False)

    @property
    def active_pool(self) -> list[PolicySpec]:
        return list(self.pool.values())

    def bound(self, candidate: PolicySpec, comparator: PolicySpec) -> ConfidenceBound:
        return self.stats[(candidate.key(), comparator.key())]


class _Evaluator:
    """Pair statistics with caching of per-policy path costs."""

    def __init__(self, replay: ReplayContext, cfg: EpochConfig):
        self.replay = replay
        self.cfg = cfg
        self._costs = {}

    def costs(self, spec: PolicySpec) -> np.ndarray:
        k = spec.key()
        if k not in self._costs:
            self._costs[k] = np.asarray(self.replay.path_costs(spec), dtype=float)
        return self._costs[k]

    def pair(self, state: EpochState, cand: PolicySpec, comp: PolicySpec) -> ConfidenceBound:
        key = (cand.key(), comp.key())
        if key in state.stats:
            return state.stats[key]
        if cand == comp:
            g = GainSamples((0.0,), 1.0, cand, comp)
        else:
            if state.evaluations_used >= state.budget:
                raise BudgetExceeded(f"evaluation budget {state.budget} exhausted")
            g = GainSamples.from_costs(self.costs(cand), self.costs(comp), cand, comp, self.cfg.gain_bound)
            state.evaluations_used += 1
            state.bound_observed = state.bound_observed or g.bound_observed
        cb = confidence_bound(g, state.budget, self.cfg.delta, self.cfg.cert_method, self.replay.lead_time)
        state.stats[key] = cb
        return cb


def _argmax_ucb(state: EpochState, members: Sequence[PolicySpec]) -> PolicySpec:
    order = {k: i for i, k in enumerate(state.pool)}
    return min(members, key=lambda p: (-state.bound(p, state.reference).ucb, order.get(p.key(), len(order)), p.key()))


def _feasible(state: EpochState, xi: float) -> list[PolicySpec]:
    return [p for p in state.pool.values() if state.bound(p, state.reference).lcb >= xi]


def init_epoch(baselines: Iterable[PolicySpec], incumbent: PolicySpec | None, reference: PolicySpec,
               replay: ReplayContext, cfg: EpochConfig) -> EpochState:
    base = [canonicalize(p) for p in baselines]
    reference = canonicalize(reference)
    if reference not in base:
        raise ConfigError("reference policy must be one of the baselines")
    pool = {}
    for p in base + ([canonicalize(incumbent)] if incumbent is not None else []):
        report = check_validity(p)
        if not report.valid:
            raise ConfigError(f"initial pool member {p!r} is invalid: {list(report.violations)}")
        pool.setdefault(p.key(), p)
    budget = evaluation_budget(len(pool), cfg.J)
    state = EpochState(reference, reference, pool, 0, 0, budget, initial_pool=list(pool))
    ev = state.evaluator = _Evaluator(replay, cfg)
    for p in pool.values():
        ev.pair(state, p, reference)
    feas = _feasible(state, cfg.xi)
    state.initial_feasible = [p.key() for p in feas]
    state.champion = _argmax_ucb(state, feas + [reference])
    state.champion_path.append((0, state.champion.key()))
    return state


def run_round(state: EpochState, candidate, replay: ReplayContext, cfg: EpochConfig) -> tuple[EpochState, GateDecision]:
    if state.round >= cfg.J:
        raise ConfigError("all rounds already used")
    state.round += 1
    j = state.round
    ev = state.evaluator
    if ev is None or ev.replay is not replay:
        ev = state.evaluator = _Evaluator(replay, cfg)
    report = check_validity(candidate)
    if not report.valid:
        d = GateDecision(j, candidate if isinstance(candidate, PolicySpec) else None, status="invalid",
                         reason="; ".join(report.violations))
        state.decisions.append(d)
        return state, d
    cand = canonicalize(candidate)
    report = check_validity(cand)
    if not report.valid:
        d = GateDecision(j, cand, status="invalid", reason="; ".join(report.violations))
        state.decisions.append(d)
        return state, d
    needed = len({comp.key() for comp in (state.reference, state.champion)
                  if comp != cand and (cand.key(), comp.key()) not in state.stats})
    if state.evaluations_used + needed > state.budget:
        raise BudgetExceeded(f"round {j} would exceed the evaluation budget {state.budget}")
    state.pool.setdefault(cand.key(), cand)
    prev = state.champion
    vs_ref = ev.pair(state, cand, state.reference)
    vs_champ = ev.pair(state, cand, prev)
    safe = vs_ref.lcb >= cfg.xi
    better = vs_champ.lcb >= cfg.epsilon + cfg.xi
    promoted = safe and better
    if promoted:
        state.champion = cand
        state.champion_path.append((j, cand.key()))
    d = GateDecision(j, cand, vs_ref.lcb, vs_champ.lcb, vs_champ.ucb, safe, better, promoted)
    state.decisions.append(d)
    return state, d


def skip_round(state: EpochState, reason: str) -> GateDecision:
    """Log a round whose proposal could not be obtained; it still counts toward J."""
    state.round += 1
    d = GateDecision(state.round, None, status="proposal_error", reason=reason)
    state.decisions.append(d)
    return d


@dataclass
class EpochLog:
    config: dict
    budget: int
    evaluations_used: int
    reference: dict
    initial_pool: list
    initial_feasible: list
    champion_path: list
    decisions: list
    stats: list
    final_feasible: list
    deployed: dict
    deployment_path: str
    bound_observed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config, "budget": self.budget, "evaluations_used": self.evaluations_used,
            "reference": self.reference, "initial_pool": self.initial_pool,
            "initial_feasible": self.initial_feasible, "champion_path": self.champion_path,
            "decisions": self.decisions, "stats": self.stats, "final_feasible": self.final_feasible,
            "deployed": self.deployed, "deployment_path": self.deployment_path,
            "bound_observed": self.bound_observed,
        }
        out.update(self.extra)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


def deploy(state: EpochState, cfg: EpochConfig) -> tuple[PolicySpec, EpochLog]:
    feas = _feasible(state, cfg.xi)
    if feas:
        chosen, path = _argmax_ucb(state, feas), "feasible"
    else:
        chosen, path = state.reference, "fallback_reference"
    stats = [
        {"candidate": json.loads(c), "comparator": json.loads(r), **cb.to_json()}
        for (c, r), cb in state.stats.items()
    ]
    epoch_log = EpochLog(
        config=cfg.to_json(),
        budget=state.budget,
        evaluations_used=state.evaluations_used,
        reference=state.reference.to_json(),
        initial_pool=[json.loads(k) for k in state.initial_pool],
        initial_feasible=[json.loads(k) for k in state.initial_feasible],
        champion_path=[{"round": j, "policy": json.loads(k)} for j, k in state.champion_path],
        decisions=[d.to_json() for d in state.decisions],
        stats=stats,
        final_feasible=[p.to_json() for p in feas],
        deployed=chosen.to_json(),
        deployment_path=path,
        bound_observed=state.bound_observed,
    )
    return chosen, epoch_log


def run_epoch(replay: ReplayContext, baselines: Sequence[PolicySpec], incumbent: PolicySpec | None,
              reference: PolicySpec, proposer, cfg: EpochConfig, summary: dict | None = None
              ) -> tuple[PolicySpec, EpochLog]:
    """Initialize, run up to J proposal rounds, and deploy.

    ``proposer`` is any object with ``propose(context) -> PolicySpec``; a
    proposer that raises :class:`ProposalsExhausted` ends the loop early and
    any other exception skips that round.
    """
    from .proposers import context_digest

    state = init_epoch(baselines, incumbent, reference, replay, cfg)
    while state.round < cfg.J:
        ctx = context_digest(state, summary or {})
        try:
            candidate = proposer.propose(ctx)
        except ProposalsExhausted:
            break
        except Exception as exc:  # a failing proposer costs the round, not the epoch
            log.warning("proposal failed in round %d: %s", state.round + 1, exc)
            skip_round(state, f"{type(exc).__name__}: {exc}")
            continue
        run_round(state, candidate, replay, cfg)
    return deploy(state, cfg)


def iterate_refinement(replay: ReplayContext, baselines: Sequence[PolicySpec], reference: PolicySpec,
                       proposer, cfg: EpochConfig, rounds: int, summary: dict | None = None
                       ) -> list[tuple[PolicySpec, EpochLog]]:
    """Repeat the epoch, adding each deployed policy to the next run's baselines."""
    if rounds < 1:
        raise ConfigError("rounds must be at least 1")
    pool = list(baselines)
    out = []
    for _ in range(rounds):
        d, epoch_log = run_epoch(replay, pool, None, reference, proposer, cfg, summary)
        out.append((d, epoch_log))
        if d not in pool:
            pool.append(d)
    return out
