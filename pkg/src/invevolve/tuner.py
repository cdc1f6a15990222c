"""Fixed-budget hyperparameter search over a policy family's parameter box.

The first third of the budget is a scrambled Halton design over the box; the
remaining trials are Gaussian perturbations of the incumbent best point (now
and then one of the runners-up) with a width that shrinks quadratically in the
trial index. Everything is driven by one seeded generator, so identical inputs
give identical trials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.stats import qmc

from .policies import FAMILIES, PolicySpec


@dataclass(frozen=True)
class Param:
    name: str
    low: float
    high: float
    integer: bool = False
    # coordinate is a fraction of another parameter's value (s <= S)
    relative_to: str | None = None
    # "sqrt" spends more of the unit interval near the lower bound
    scale: str = "linear"

    def __post_init__(self):
        if not self.low <= self.high:
            raise ValueError(f"{self.name}: lower bound {self.low} exceeds upper bound {self.high}")


@dataclass(frozen=True)
class ParamSpace:
    family: str
    params: tuple

    @property
    def dim(self) -> int:
        return len(self.params)

    def decode(self, u) -> dict:
        """Map a point of the unit cube to concrete parameter values."""
        out = {}
        for p, x in zip(self.params, u):
            x = min(max(float(x), 0.0), 1.0)
            if p.scale == "sqrt":
                x = x * x
            if p.relative_to is not None:
                value = x * out[p.relative_to]
            else:
                value = p.low + x * (p.high - p.low)
            if p.integer:
                value = int(round(value))
            out[p.name] = value
        return out


# local phase: initial perturbation width (unit-cube units), elite restarts
INITIAL_WIDTH = 0.12
MIN_WIDTH = 0.003
ELITES = 3
ELITE_PROB = 0.3


def param_space(family: str, mean_demand: float, lead_time: int, history_len: int = 100) -> ParamSpace:
    """Default search box for ``family`` given the demand scale and lead time."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    mean_demand = max(float(mean_demand), 1e-6)
    s_hi = 4.0 * mean_demand * (lead_time + 1)
    q_hi = 3.0 * mean_demand
    # caps share the constant-order box: a cap far above typical demand never binds
    r_hi = q_hi
    S = Param("S", 0.0, s_hi)
    boxes = {
        "BaseStock": (S,),
        "CappedBaseStock": (S, Param("r", 0.0, r_hi)),
        "ConstantOrder": (Param("q", 0.0, q_hi),),
        "Newsvendor": (Param("W", 7, max(7, history_len), integer=True),),
        "SmallSBigS": (S, Param("s", 0.0, 1.0, relative_to="S")),
        "TiltedCBS": (S, Param("r_base", 0.0, r_hi), Param("alpha", 0.0, 1.0, scale="sqrt")),
        "TiltedPIC": (S, Param("r_base", 0.0, r_hi), Param("alpha", 0.0, 1.0, scale="sqrt"), Param("K_p", 0.01, 1.5)),
    }
    return ParamSpace(family, boxes[family])


@dataclass
class TuneResult:
    family: str
    best_params: dict
    best_cost: float
    trials: list = field(default_factory=list)
    seed: int = 0

    @property
    def best_policy(self) -> PolicySpec:
        return PolicySpec(self.family, self.best_params)

    def running_best(self) -> list[float]:
        out, best = [], math.inf
        for _, cost in self.trials:
            best = min(best, cost)
            out.append(best)
        return out


def _safe(objective, params) -> float:
    try:
        value = float(objective(params))
    except (ArithmeticError, ValueError):
        return math.inf
    return value if math.isfinite(value) else math.inf


def tune(family: str, space: ParamSpace, objective: Callable[[Mapping], float], budget: int = 50,
         seed: int = 0) -> TuneResult:
    """Minimize ``objective`` over ``space`` with exactly ``budget`` evaluations."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if space.family != family:
        raise ValueError(f"space is for {space.family}, not {family}")
    rng = np.random.default_rng(seed)
    d = space.dim
    n_init = math.ceil(budget / 3)
    design = qmc.Halton(d=d, scramble=True, seed=rng).random(n_init)
    trials = []
    points = []

    def record(u):
        params = space.decode(u)
        cost = _safe(objective, params)
        trials.append((params, cost))
        points.append(np.array(u, dtype=float))

    for u in design:
        record(u)
    n_local = budget - n_init
    for k in range(n_local):
        ranked = sorted(range(len(trials)), key=lambda i: (trials[i][1], i))
        centre = ranked[0]
        if rng.random() < ELITE_PROB:
            # occasionally restart from a runner-up to escape a flat basin
            centre = ranked[rng.integers(min(ELITES, len(ranked)))]
        centre_u = points[centre]
        width = INITIAL_WIDTH * (1.0 - k / n_local) ** 2 + MIN_WIDTH
        step = rng.normal(0.0, width, size=d)
        if d > 1 and rng.random() < 0.5:
            # move along a random subset of coordinates only
            mask = rng.random(d) < 0.5
            mask[rng.integers(d)] = True
            step = step * mask
        record(np.clip(centre_u + step, 0.0, 1.0))
    best_idx = min(range(len(trials)), key=lambda i: (trials[i][1], i))
    best_params, best = trials[best_idx]
    return TuneResult(family, dict(best_params), best, trials, seed)


def tune_policy(family: str, demands, cfg, budget: int = 50, seed: int = 0, prior_demands=(),
                space: ParamSpace | None = None) -> TuneResult:
    """Tune ``family`` by average simulated cost over ``demands``."""
    from .sim import average_cost

    demands = [float(x) for x in demands]
    if space is None:
        mean = float(np.mean(demands)) if demands else 1.0
        space = param_space(family, mean, cfg.lead_time, len(demands))

    def objective(params):
        return average_cost(PolicySpec(family, params), demands, cfg, prior_demands=prior_demands)

    return tune(family, space, objective, budget, seed)
