"""Period-level lost-sales inventory dynamics with a fixed lead time.

Each period runs receive -> order -> demand -> cost. The order is decided on
the post-arrival state; with zero lead time it is received before demand.
Holding cost is charged on end-of-period on-hand stock only.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .policies import PolicyError, PolicySpec, compile_policy


@dataclass(frozen=True)
class SystemConfig:
    lead_time: int
    holding_cost: float
    penalty_cost: float
    horizon: int = 1

    def __post_init__(self):
        if int(self.lead_time) != self.lead_time or self.lead_time < 0:
            raise ValueError(f"lead_time must be a non-negative integer, got {self.lead_time}")
        if not self.holding_cost > 0:
            raise ValueError("holding_cost must be positive")
        if not self.penalty_cost > 0:
            raise ValueError("penalty_cost must be positive")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")

    def with_horizon(self, horizon: int) -> "SystemConfig":
        return SystemConfig(self.lead_time, self.holding_cost, self.penalty_cost, horizon)


@dataclass(frozen=True)
class InventoryState:
    on_hand: float
    pipeline: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "pipeline", tuple(float(x) for x in self.pipeline))
        if self.on_hand < 0 or any(x < 0 for x in self.pipeline):
            raise ValueError("inventory state entries must be non-negative")

    @classmethod
    def empty(cls, lead_time: int) -> "InventoryState":
        return cls(0.0, (0.0,) * lead_time)


@dataclass(frozen=True)
class PeriodRecord:
    order: float
    sales: float
    lost: float
    end_on_hand: float
    cost: float


@dataclass
class SimResult:
    total_cost: float
    avg_cost: float
    per_period: list = field(default_factory=list)
    final_state: InventoryState | None = None

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.per_period])


def inventory_position(state: InventoryState) -> float:
    return state.on_hand + sum(state.pipeline)


def _check_state(state: InventoryState, cfg: SystemConfig):
    if len(state.pipeline) != cfg.lead_time:
        raise ValueError(f"pipeline length {len(state.pipeline)} != lead time {cfg.lead_time}")


def step(state: InventoryState, order: float, demand: float, cfg: SystemConfig):
    """Advance one period. Returns ``(next_state, period_cost, sales, lost)``."""
    if not order >= 0 or not demand >= 0:
        raise ValueError(f"order and demand must be non-negative (order={order}, demand={demand})")
    _check_state(state, cfg)
    on_hand = state.on_hand
    if cfg.lead_time:
        on_hand += state.pipeline[0]
        pipeline = state.pipeline[1:] + (float(order),)
    else:
        on_hand += order
        pipeline = ()
    sales = min(on_hand, demand)
    lost = demand - sales
    on_hand -= sales
    cost = cfg.holding_cost * on_hand + cfg.penalty_cost * lost
    return InventoryState(on_hand, pipeline), cost, sales, lost


def _run(spec, demands, cfg, init, prior_demands, record, warmup=0):
    if isinstance(demands, np.ndarray):
        demands = demands.astype(float).tolist()
    L = cfg.lead_time
    h = cfg.holding_cost
    pen = cfg.penalty_cost
    ctl = compile_policy(spec, L, h, pen, prior_demands)
    decide_order = ctl.order
    observe = ctl.observe if ctl.needs_history else None
    on_hand = float(init.on_hand)
    pipe = deque(init.pipeline)
    costs = []
    records = [] if record else None
    isfinite = math.isfinite
    for d in demands:
        if d < 0:
            raise ValueError(f"negative demand {d}")
        if L:
            on_hand += pipe.popleft()
            q = decide_order(on_hand + sum(pipe))
        else:
            q = decide_order(on_hand)
        if not (q >= 0.0 and isfinite(q)):
            raise PolicyError(f"{spec!r} produced invalid order {q!r}")
        if L:
            pipe.append(q)
        else:
            on_hand += q
        if on_hand >= d:
            sales = d
            lost = 0.0
            on_hand -= d
        else:
            sales = on_hand
            lost = d - on_hand
            on_hand = 0.0
        c = h * on_hand + pen * lost
        costs.append(c)
        if record:
            records.append(PeriodRecord(q, sales, lost, on_hand, c))
        if observe is not None:
            observe(d)
    final = InventoryState(on_hand, tuple(pipe))
    if warmup:
        costs = costs[warmup:]
        if record:
            records = records[warmup:]
    return costs, records, final


def simulate(spec: PolicySpec, demands: Sequence[float], cfg: SystemConfig, init: InventoryState | None = None,
             features=None, prior_demands: Sequence[float] = (), warmup: int = 0) -> SimResult:
    """Run ``spec`` over ``demands`` and return per-period accounting.

    ``prior_demands`` seeds history-based policies (the observed history
    before the first simulated period). The first ``warmup`` periods are
    simulated but excluded from cost.
    """
    if len(demands) != cfg.horizon:
        raise ValueError(f"demand length {len(demands)} != horizon {cfg.horizon}")
    if features is not None and len(features) != len(demands):
        raise ValueError("features must align with demands")
    if not 0 <= warmup < cfg.horizon:
        raise ValueError("warmup must leave at least one costed period")
    init = init if init is not None else InventoryState.empty(cfg.lead_time)
    _check_state(init, cfg)
    costs, records, final = _run(spec, [float(d) for d in demands], cfg, init, prior_demands, True, warmup)
    total = math.fsum(costs)
    return SimResult(total, total / len(costs), records, final)


def period_costs(spec: PolicySpec, demands: Sequence[float], cfg: SystemConfig, init: InventoryState | None = None,
                 prior_demands: Sequence[float] = (), warmup: int = 0) -> tuple[np.ndarray, InventoryState]:
    """Per-period cost vector without building period records."""
    init = init if init is not None else InventoryState.empty(cfg.lead_time)
    _check_state(init, cfg)
    costs, _, final = _run(spec, demands, cfg, init, prior_demands, False, warmup)
    return np.asarray(costs, dtype=float), final


def average_cost(spec: PolicySpec, demands: Sequence[float], cfg: SystemConfig, init: InventoryState | None = None,
                 prior_demands: Sequence[float] = (), warmup: int = 0) -> float:
    """Average per-period cost; the evaluation objective used by tuning and replay."""
    init = init if init is not None else InventoryState.empty(cfg.lead_time)
    costs, _, _ = _run(spec, demands, cfg, init, prior_demands, False, warmup)
    return math.fsum(costs) / len(costs)
