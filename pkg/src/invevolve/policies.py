"""White-box ordering policies as a closed, typed DSL.

A :class:`PolicySpec` is a family name plus a flat mapping of real-valued
parameters. Specs serialize to ``{"family": ..., "params": {...}}`` and are
compared by their canonical JSON key, so two specs that canonicalize to the
same grid point are the same policy.
"""
from __future__ import annotations

import bisect
import functools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

GRID_DECIMALS = 4

# family -> (required params, optional params)
FAMILIES: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "BaseStock": (("S",), ()),
    "CappedBaseStock": (("S", "r"), ()),
    "ConstantOrder": (("q",), ()),
    "Newsvendor": (("W",), ("ratio",)),
    "SmallSBigS": (("s", "S"), ()),
    "TiltedCBS": (("S", "r_base", "alpha"), ()),
    "TiltedPIC": (("S", "r_base", "alpha", "K_p"), ()),
}

BASELINE_FAMILIES = ("BaseStock", "CappedBaseStock", "ConstantOrder", "Newsvendor", "SmallSBigS")
INTEGER_PARAMS = frozenset({"W"})


class InvalidPolicy(ValueError):
    """Raised when a policy cannot be constructed from the given family/params."""


class PolicyError(ValueError):
    """A policy produced a non-finite or negative order during simulation."""


@dataclass(frozen=True, eq=False)
class PolicySpec:
    family: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidPolicy(f"unknown policy family {self.family!r}")
        required, optional = FAMILIES[self.family]
        names = set(self.params)
        missing = [n for n in required if n not in names]
        extra = sorted(names - set(required) - set(optional))
        if missing:
            raise InvalidPolicy(f"{self.family}: missing parameters {missing}")
        if extra:
            raise InvalidPolicy(f"{self.family}: unknown parameters {extra}")
        clean = {}
        for name in (*required, *optional):
            if name not in self.params:
                continue
            value = self.params[name]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidPolicy(f"{self.family}.{name} must be a number, got {value!r}")
            clean[name] = int(value) if name in INTEGER_PARAMS and float(value).is_integer() else float(value)
        object.__setattr__(self, "params", clean)
        object.__setattr__(self, "_key", json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")))

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def key(self) -> str:
        return self._key

    def to_json(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "PolicySpec":
        if not isinstance(obj, Mapping) or "family" not in obj:
            raise InvalidPolicy(f"policy JSON must be an object with a 'family' field: {obj!r}")
        params = obj.get("params", {})
        if not isinstance(params, Mapping):
            raise InvalidPolicy("'params' must be an object")
        return cls(str(obj["family"]), dict(params))

    def __eq__(self, other):
        if not isinstance(other, PolicySpec):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family}{{{inner}}}"


def policy(family: str, **params: float) -> PolicySpec:
    """Build a spec and reject it unless every parameter bound holds."""
    spec = PolicySpec(family, params)
    problems = parameter_violations(spec)
    if problems:
        raise InvalidPolicy(f"{spec!r}: " + "; ".join(problems))
    return spec


def parameter_violations(spec: PolicySpec) -> list[str]:
    p = spec.params
    out = []
    for name, value in p.items():
        if not math.isfinite(value):
            out.append(f"{name} not finite")
    if out:
        return out
    for name in ("S", "r", "q", "s", "r_base"):
        if name in p and p[name] < 0:
            out.append(f"{name} negative")
    if "alpha" in p and not 0.0 <= p["alpha"] <= 1.0:
        out.append("alpha out of [0,1]")
    if "K_p" in p and not 0.0 < p["K_p"] <= 1.5:
        out.append("K_p out of (0,1.5]")
    if spec.family == "Newsvendor":
        if not isinstance(p["W"], int) or p["W"] < 1:
            out.append("W must be an integer >= 1")
        if "ratio" in p and not 0.0 < p["ratio"] < 1.0:
            out.append("ratio out of (0,1)")
    if spec.family == "SmallSBigS" and p["s"] > p["S"]:
        out.append("s exceeds S")
    return out


def conservative_quantile(sorted_values: Sequence[float], level: float) -> float:
    """Smallest order statistic whose empirical CDF reaches ``level``."""
    n = len(sorted_values)
    k = max(1, math.ceil(level * n - 1e-9))
    return sorted_values[min(k, n) - 1]


def critical_ratio(spec: PolicySpec, holding_cost: float, penalty_cost: float) -> float:
    return spec.params.get("ratio", penalty_cost / (penalty_cost + holding_cost))


class Controller:
    """Stateful decision rule compiled from a spec for one simulation run.

    ``order(ip)`` returns the order for inventory position ``ip``; ``observe``
    feeds realized demand to history-based families.
    """

    needs_history = False

    def order(self, ip: float) -> float:
        raise NotImplementedError

    def observe(self, demand: float) -> None:
        pass


class _Fn(Controller):
    def __init__(self, fn):
        self.order = fn


class _NewsvendorController(Controller):
    needs_history = True

    def __init__(self, window: int, ratio: float, scale: float, prior: Iterable[float]):
        self.window = window
        self.ratio = ratio
        self.scale = scale
        self.recent: deque[float] = deque()
        self.sorted: list[float] = []
        for d in prior:
            self.observe(d)

    def observe(self, demand: float) -> None:
        self.recent.append(demand)
        bisect.insort(self.sorted, demand)
        if len(self.recent) > self.window:
            old = self.recent.popleft()
            del self.sorted[bisect.bisect_left(self.sorted, old)]

    def order(self, ip: float) -> float:
        if not self.sorted:
            return 0.0
        target = conservative_quantile(self.sorted, self.ratio) * self.scale
        return max(0.0, target - ip)


def compile_policy(spec: PolicySpec, lead_time: int, holding_cost: float, penalty_cost: float,
                   prior_demands: Sequence[float] = ()) -> Controller:
    p = spec.params
    fam = spec.family
    if fam == "BaseStock":
        S = p["S"]
        return _Fn(lambda ip: S - ip if ip < S else 0.0)
    if fam == "CappedBaseStock":
        S, r = p["S"], p["r"]
        return _Fn(lambda ip: (min(S - ip, r) if ip < S else 0.0))
    if fam == "ConstantOrder":
        q = p["q"]
        return _Fn(lambda ip: q)
    if fam == "SmallSBigS":
        s, S = p["s"], p["S"]
        return _Fn(lambda ip: S - ip if ip < s else 0.0)
    if fam == "TiltedCBS":
        S, rb, a = p["S"], p["r_base"], p["alpha"]

        def tilted(ip):
            if ip >= S:
                return 0.0
            gap = S - ip
            return min(gap, rb + a * gap)
        return _Fn(tilted)
    if fam == "TiltedPIC":
        S, rb, a, kp = p["S"], p["r_base"], p["alpha"], p["K_p"]

        def pic(ip):
            gap = S - ip if ip < S else 0.0
            # round() is round-half-to-even on floats
            q = min(float(round(kp * gap)), rb + a * gap)
            return q if q > 0.0 else 0.0
        return _Fn(pic)
    if fam == "Newsvendor":
        ratio = critical_ratio(spec, holding_cost, penalty_cost)
        return _NewsvendorController(int(p["W"]), ratio, lead_time + 1, prior_demands)
    raise InvalidPolicy(f"unknown policy family {fam!r}")


def decide(spec: PolicySpec, state, features=None, demand_history: Sequence[float] = (), cfg=None) -> float:
    """Order quantity for ``spec`` at a post-arrival state.

    ``features`` is accepted for interface symmetry; none of the shipped
    families reads exogenous features.
    """
    from .sim import inventory_position

    lead_time = cfg.lead_time if cfg is not None else len(state.pipeline)
    h = cfg.holding_cost if cfg is not None else 1.0
    pen = cfg.penalty_cost if cfg is not None else 1.0
    history = list(demand_history)
    if spec.family == "Newsvendor":
        history = history[-int(spec.params["W"]):]
    ctl = compile_policy(spec, lead_time, h, pen, history)
    return ctl.order(inventory_position(state))


def _on_grid(x: float) -> float:
    return round(x, GRID_DECIMALS) + 0.0


def _integral(x: float) -> bool:
    return float(x).is_integer()


def canonicalize(spec: PolicySpec) -> PolicySpec:
    """Snap parameters to the 1e-4 grid and collapse nested families.

    Reductions: Tilted-PIC with unit gain (and integral S, r_base) becomes
    Tilted-CBS; Tilted-CBS with zero elasticity becomes capped base stock;
    a non-binding cap (r >= S) or s == S becomes plain base stock.
    """
    params = {k: (v if k in INTEGER_PARAMS else _on_grid(v)) for k, v in spec.params.items()}
    fam = spec.family
    while True:
        if fam == "TiltedPIC" and params["K_p"] == 1.0 and _integral(params["S"]) and _integral(params["r_base"]):
            fam = "TiltedCBS"
            params = {k: params[k] for k in ("S", "r_base", "alpha")}
        elif fam == "TiltedCBS" and params["alpha"] == 0.0:
            fam = "CappedBaseStock"
            params = {"S": params["S"], "r": params["r_base"]}
        elif fam == "CappedBaseStock" and params["r"] >= params["S"]:
            fam = "BaseStock"
            params = {"S": params["S"]}
        elif fam == "SmallSBigS" and params["s"] == params["S"]:
            fam = "BaseStock"
            params = {"S": params["S"]}
        else:
            break
    return PolicySpec(fam, params)


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    violations: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"valid": self.valid, "violations": list(self.violations)}


def default_probe_states(spec: PolicySpec, lead_time: int = 0):
    from .sim import InventoryState

    top = 3.0 * max(spec.params.get("S", 0.0), 10.0)
    return [InventoryState(float(ip), (0.0,) * lead_time) for ip in range(int(top) + 1)]


def check_validity(spec, probe_states=None, cfg=None) -> ValidityReport:
    """Structural validity indicator: bounds hold and decisions are finite and non-negative."""
    if not isinstance(spec, PolicySpec):
        reason = getattr(spec, "reason", None) or "not a policy spec"
        return ValidityReport(False, (reason,))
    if probe_states is None:
        try:
            return _default_validity(spec, cfg)
        except TypeError:  # unhashable configuration
            return _probe_validity(spec, None, cfg)
    return _probe_validity(spec, probe_states, cfg)


@functools.lru_cache(maxsize=4096)
def _default_validity(spec: PolicySpec, cfg) -> ValidityReport:
    return _probe_validity(spec, None, cfg)


def _probe_validity(spec: PolicySpec, probe_states, cfg) -> ValidityReport:
    violations = parameter_violations(spec)
    if violations:
        return ValidityReport(False, tuple(violations))
    lead_time = cfg.lead_time if cfg is not None else 0
    states = probe_states if probe_states is not None else default_probe_states(spec, lead_time)
    history = [5.0] * 7
    for st in states:
        try:
            q = decide(spec, st, None, history, cfg)
        except (ArithmeticError, ValueError) as exc:
            return ValidityReport(False, (f"decision raised {exc!r}",))
        if not math.isfinite(q):
            return ValidityReport(False, ("non-finite decision",))
        if q < 0:
            return ValidityReport(False, ("negative decision",))
    return ValidityReport(True)


POLICY_SCHEMA = {
    "type": "object",
    "required": ["family", "params"],
    "properties": {
        "family": {"enum": list(FAMILIES)},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
    },
    "families": {
        fam: {"required": list(req), "optional": list(opt)} for fam, (req, opt) in FAMILIES.items()
    },
    "bounds": {
        "S": ">= 0", "r": ">= 0", "q": ">= 0", "s": "0 <= s <= S", "r_base": ">= 0",
        "alpha": "[0, 1]", "K_p": "(0, 1.5]", "W": "integer >= 1", "ratio": "(0, 1)",
    },
}
