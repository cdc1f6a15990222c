"""Candidate generators for the certified search loop.

Three sources share one interface, ``propose(context) -> PolicySpec``:
a seeded mutation proposer, a scripted fixture, and an HTTP client for an
external model that answers with policy JSON.
"""
from __future__ import annotations

import functools
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .engine import EpochState, ProposalsExhausted
from .policies import POLICY_SCHEMA, InvalidPolicy, PolicySpec
from .tuner import param_space

log = logging.getLogger(__name__)

MAX_DIGEST_BYTES = 16 * 1024
URL_ENV = "INVEVOLVE_PROPOSER_URL"
TOKEN_ENV = "INVEVOLVE_PROPOSER_TOKEN"


@dataclass(frozen=True)
class InvalidProposal:
    """Sentinel for a proposal that could not be turned into a policy (g = 0)."""
    reason: str


class ProposerUnavailable(RuntimeError):
    pass


def demand_summary(demands: Sequence[float], lead_time: int | None = None, holding_cost: float | None = None,
                   penalty_cost: float | None = None) -> dict:
    """Compact description of a demand history for proposal prompts."""
    d = np.asarray(demands, dtype=float)
    mean = float(d.mean()) if d.size else 0.0
    # an all-zero series reports CV 0 by convention
    cv = float(d.std() / mean) if mean > 0 else 0.0
    tail = d[-28:]
    trend = float(np.polyfit(np.arange(tail.size), tail, 1)[0]) if tail.size >= 2 else 0.0
    out = {
        "n_days": int(d.size),
        "mean": mean,
        "cv": cv,
        "zero_ratio": float(np.mean(d == 0)) if d.size else 0.0,
        "trend_28": trend,
    }
    if lead_time is not None:
        out["lead_time"] = int(lead_time)
    if holding_cost is not None:
        out["holding_cost"] = float(holding_cost)
    if penalty_cost is not None:
        out["penalty_cost"] = float(penalty_cost)
    return out


@dataclass(frozen=True)
class ProposalContext:
    round: int
    summary: dict
    champion: PolicySpec
    reference: PolicySpec
    pool: tuple
    stats: tuple
    decisions: tuple

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "summary": self.summary,
            "champion": self.champion.to_json(),
            "reference": self.reference.to_json(),
            "pool": [p.to_json() for p in self.pool],
            "stats": list(self.stats),
            "decisions": list(self.decisions),
        }

    def to_text(self, limit: int = MAX_DIGEST_BYTES) -> str:
        """JSON digest no larger than ``limit`` bytes; oldest statistics are dropped first."""
        doc = self.to_json()
        text = json.dumps(doc, sort_keys=True)
        while len(text.encode()) > limit and (doc["stats"] or doc["decisions"] or doc["pool"]):
            for k in ("stats", "decisions", "pool"):
                if doc[k]:
                    doc[k] = doc[k][1:]
                    break
            doc["truncated"] = True
            text = json.dumps(doc, sort_keys=True)
        return text


@functools.lru_cache(maxsize=8192)
def _key_json(key: str) -> dict:
    return json.loads(key)


def context_digest(state: EpochState, summary: Mapping) -> ProposalContext:
    stats = []
    for (c, r), cb in state.stats.items():
        stats.append({"candidate": _key_json(c), "comparator": _key_json(r),
                      "mean": cb.mean, "lcb": cb.lcb, "ucb": cb.ucb})
    decisions = [
        {"round": d.round, "promoted": d.promoted, "status": d.status,
         "S": d.S_score, "I": d.I_score, "O": d.O_score}
        for d in state.decisions
    ]
    return ProposalContext(state.round + 1, dict(summary), state.champion, state.reference,
                           tuple(state.pool.values()), tuple(stats), tuple(decisions))


@dataclass(frozen=True)
class ProposerConfig:
    kind: str = "mutation"
    seed: int = 0
    mutation_scale: float = 0.1
    switch_prob: float = 0.15
    scales: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("mutation", "scripted", "external"):
            raise ValueError(f"unknown proposer kind {self.kind!r}")
        if not 0.0 <= self.switch_prob <= 1.0:
            raise ValueError("switch_prob must lie in [0,1]")
        if self.mutation_scale < 0:
            raise ValueError("mutation_scale must be non-negative")


def _box(family: str, summary: Mapping):
    mean = summary.get("mean", 1.0) or 1.0
    space = param_space(family, mean, int(summary.get("lead_time", 0)), int(summary.get("n_days", 100)))
    return {p.name: p for p in space.params}


def _mid(p) -> float:
    return 0.5 * (p.low + p.high)


class MutationProposer:
    """Gaussian perturbation of the champion, with occasional family moves.

    Each parameter moves by ``mutation_scale`` times its magnitude (at least
    5% of its search box) and is clamped to the box.

    The generator is seeded from (seed, round), so a proposal depends only on
    the context and the configuration.
    """

    def __init__(self, cfg: ProposerConfig | None = None):
        self.cfg = cfg or ProposerConfig()

    def propose(self, ctx: ProposalContext) -> PolicySpec:
        rng = np.random.default_rng([self.cfg.seed, ctx.round])
        champ = ctx.champion
        if rng.random() < self.cfg.switch_prob:
            return self.switch(champ, ctx.summary)
        return self.perturb(champ, ctx.summary, rng)

    def perturb(self, spec: PolicySpec, summary: Mapping, rng) -> PolicySpec:
        box = _box(spec.family, summary)
        params = dict(spec.params)
        for name in sorted(params):
            if name not in box:
                continue
            p = box[name]
            low, high = (0.0, params.get("S", 0.0)) if p.relative_to else (p.low, p.high)
            width = high - low
            # relative step, floored so parameters near zero can still move
            sigma = self.cfg.scales.get(name, self.cfg.mutation_scale * max(abs(params[name]), 0.05 * width))
            value = params[name] + sigma * rng.normal()
            value = min(max(value, low), high)
            params[name] = int(round(value)) if p.integer else value
        if spec.family == "SmallSBigS":
            params["s"] = min(params["s"], params["S"])
        return PolicySpec(spec.family, params)

    def switch(self, spec: PolicySpec, summary: Mapping) -> PolicySpec:
        p = spec.params
        fam = spec.family
        if fam == "CappedBaseStock":
            return PolicySpec("TiltedCBS", {"S": p["S"], "r_base": p["r"], "alpha": 0.5})
        if fam == "TiltedCBS":
            return PolicySpec("TiltedPIC", {**p, "K_p": 0.75})
        if fam == "TiltedPIC":
            return PolicySpec("TiltedCBS", {k: p[k] for k in ("S", "r_base", "alpha")})
        box = _box("CappedBaseStock", summary)
        if fam == "BaseStock":
            return PolicySpec("CappedBaseStock", {"S": p["S"], "r": _mid(box["r"])})
        if fam == "ConstantOrder":
            return PolicySpec("CappedBaseStock", {"S": _mid(box["S"]), "r": p["q"]})
        if fam == "SmallSBigS":
            return PolicySpec("BaseStock", {"S": p["S"]})
        return PolicySpec("BaseStock", {"S": _mid(box["S"])})


class ScriptedProposer:
    """Replays a fixed list of proposals, or samples a fixed law over a finite set.

    With ``weights`` given, round j draws from ``items`` with those
    probabilities using a generator seeded from (seed, j); otherwise items
    are returned in order and :class:`ProposalsExhausted` follows the last.
    """

    def __init__(self, items: Sequence, weights: Sequence[float] | None = None, seed: int = 0):
        self.items = list(items)
        self.seed = seed
        self.calls = 0
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            if w.shape != (len(self.items),) or np.any(w < 0) or not w.sum() > 0:
                raise ValueError("weights must be non-negative, one per item, with positive sum")
            self.weights = w / w.sum()
        else:
            self.weights = None

    def propose(self, ctx: ProposalContext):
        self.calls += 1
        if self.weights is not None:
            rng = np.random.default_rng([self.seed, ctx.round])
            return self.items[int(rng.choice(len(self.items), p=self.weights))]
        if self.calls > len(self.items):
            raise ProposalsExhausted
        return self.items[self.calls - 1]


def parse_proposal(payload) -> PolicySpec | InvalidProposal:
    """Turn a response body into a policy, or a sentinel describing what was wrong."""
    if isinstance(payload, (bytes, str)):
        try:
            payload = json.loads(payload)
        except ValueError as exc:
            return InvalidProposal(f"response is not JSON: {exc}")
    if not isinstance(payload, Mapping):
        return InvalidProposal("response must be a JSON object")
    if "policy" not in payload:
        return InvalidProposal("response lacks a 'policy' field")
    try:
        return PolicySpec.from_json(payload["policy"])
    except InvalidPolicy as exc:
        return InvalidProposal(str(exc))


class ExternalProposer:
    """HTTP client for an external policy generator.

    Posts ``{"context", "policy_schema", "round"}`` and expects
    ``{"policy": {...}, "rationale": "..."}`` back. Endpoint and bearer token
    default to the ``INVEVOLVE_PROPOSER_URL`` / ``INVEVOLVE_PROPOSER_TOKEN``
    environment variables.
    """

    def __init__(self, url: str | None = None, token: str | None = None, timeout: float = 120.0,
                 client=None):
        import httpx

        self.url = url or os.environ.get(URL_ENV)
        if not self.url:
            raise ProposerUnavailable(f"no proposer endpoint configured (set {URL_ENV})")
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.timeout = timeout
        self._client = client or httpx.Client(timeout=timeout)
        self.rationales: list[str] = []

    def request_body(self, ctx: ProposalContext) -> dict:
        return {"context": json.loads(ctx.to_text()), "policy_schema": POLICY_SCHEMA, "round": ctx.round}

    def propose(self, ctx: ProposalContext):
        import httpx

        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        try:
            resp = self._client.post(self.url, json=self.request_body(ctx), headers=headers, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise ProposerUnavailable(f"proposer request failed: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            return InvalidProposal(f"proposer returned HTTP {resp.status_code}")
        out = parse_proposal(resp.content)
        try:
            rationale = resp.json().get("rationale", "")
        except (ValueError, AttributeError):
            rationale = ""
        self.rationales.append(str(rationale))
        return out

    def close(self):
        self._client.close()


def make_proposer(cfg: ProposerConfig, items: Sequence = (), url: str | None = None, timeout: float = 120.0):
    if cfg.kind == "mutation":
        return MutationProposer(cfg)
    if cfg.kind == "scripted":
        return ScriptedProposer(items, seed=cfg.seed)
    return ExternalProposer(url, timeout=timeout)
