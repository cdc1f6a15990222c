"""Replay gain statistics and confidence certification.

A gain sample Z is the comparator's cost minus the candidate's cost on one
replay path, so positive gains favour the candidate. Radii are union-bounded
over the N evaluations an epoch may perform.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import betaincinv

from .policies import PolicySpec, conservative_quantile

BOUND_INFLATION = 1.5
MIN_BLOCK = 7


class ColdStartWarning(UserWarning):
    """No calibration data was available; a zero budget was used."""


@dataclass(frozen=True)
class GainSamples:
    samples: tuple
    bound: float
    candidate: PolicySpec | None = None
    comparator: PolicySpec | None = None
    bound_observed: bool = False

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float).ravel()
        object.__setattr__(self, "samples", tuple(arr.tolist()))
        if not self.samples:
            raise ValueError("gain samples must be non-empty")
        if not self.bound > 0:
            raise ValueError("gain bound must be positive")
        worst = float(np.max(np.abs(arr)))
        if worst > self.bound * (1 + 1e-12):
            raise ValueError(f"sample magnitude {worst} exceeds bound {self.bound}")

    @property
    def m(self) -> int:
        return len(self.samples)

    @property
    def is_self_comparison(self) -> bool:
        return self.candidate is not None and self.candidate == self.comparator

    @classmethod
    def from_costs(cls, candidate_costs, comparator_costs, candidate=None, comparator=None,
                   bound: float | None = None) -> "GainSamples":
        """Gains from per-path costs; ``bound`` defaults to 1.5x the observed max |Z|."""
        a = np.asarray(candidate_costs, dtype=float)
        b = np.asarray(comparator_costs, dtype=float)
        if a.shape != b.shape:
            raise ValueError("candidate and comparator must share replay paths")
        z = b - a
        observed = bound is None
        if observed:
            bound = max(BOUND_INFLATION * float(np.max(np.abs(z))), 1e-12)
        return cls(tuple(z.tolist()), float(bound), candidate, comparator, observed)


@dataclass(frozen=True)
class ConfidenceBound:
    mean: float
    variance: float
    radius: float
    lcb: float
    ucb: float
    method: str
    m: int = 0
    bound: float = 0.0

    def to_json(self) -> dict:
        return {
            "mean": self.mean, "variance": self.variance, "radius": self.radius,
            "lcb": self.lcb, "ucb": self.ucb, "method": self.method, "m": self.m, "bound": self.bound,
        }


def replay_mean_var(g) -> tuple[float, float]:
    """Sample mean and biased (divide-by-m) variance of the gains."""
    z = np.asarray(g.samples if isinstance(g, GainSamples) else g, dtype=float)
    if z.size == 0:
        raise ValueError("cannot summarize an empty sample")
    mu = float(np.mean(z))
    return mu, float(np.mean((z - mu) ** 2))


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0,1), got {delta}")


def hoeffding_radius(B: float, m: int, N: int, delta: float) -> float:
    if not B > 0:
        raise ValueError("B must be positive")
    if m < 1:
        raise ValueError("m must be a positive integer")
    if N < 1:
        raise ValueError("N must be a positive integer")
    _check_delta(delta)
    return B * math.sqrt(2.0 * math.log(2.0 * N / delta) / m)


def t_quantile(prob: float, dof: int) -> float:
    """Student-t inverse CDF through the inverse regularized incomplete beta."""
    if not 0.0 < prob < 1.0:
        raise ValueError(f"prob must lie in (0,1), got {prob}")
    if dof < 1:
        raise ValueError("dof must be at least 1")
    if prob == 0.5:
        return 0.0
    tail = min(prob, 1.0 - prob)
    x = float(betaincinv(dof / 2.0, 0.5, 2.0 * tail))
    t = math.sqrt(dof * (1.0 - x) / x)
    return t if prob > 0.5 else -t


def block_size(lead_time: int) -> int:
    return max(MIN_BLOCK, lead_time + 1)


def block_means(samples: Sequence[float], b: int) -> np.ndarray:
    """Means of consecutive blocks of length ``b``; a short tail joins the last block."""
    z = np.asarray(samples, dtype=float)
    K = len(z) // b
    if K == 0:
        return np.array([z.mean()])
    out = [z[k * b:(k + 1) * b].mean() for k in range(K - 1)]
    out.append(z[(K - 1) * b:].mean())
    return np.array(out)


def blockwise_t_radius(g: GainSamples, lead_time: int, N: int, delta: float) -> ConfidenceBound:
    _check_delta(delta)
    mu, var = replay_mean_var(g)
    b = block_size(lead_time)
    K = g.m // b
    if K < 2:
        rad = hoeffding_radius(g.bound, g.m, N, delta)
        return ConfidenceBound(mu, var, rad, mu - rad, mu + rad, "hoeffding_fallback", g.m, g.bound)
    G = block_means(g.samples, b)
    gbar = float(G.mean())
    s = float(G.std(ddof=1))
    rad = t_quantile(1.0 - delta / (2.0 * N), K - 1) * s / math.sqrt(K) if s > 0 else 0.0
    return ConfidenceBound(gbar, var, rad, gbar - rad, gbar + rad, "blockwise_t", g.m, g.bound)


def evaluation_budget(initial_pool_size: int, J: int) -> int:
    if initial_pool_size < 1:
        raise ValueError("initial pool must hold at least the reference")
    if J < 1:
        raise ValueError("J must be at least 1")
    return (initial_pool_size - 1) + 2 * J


METHODS = ("hoeffding", "blockwise_t")


def confidence_bound(g: GainSamples, N: int, delta: float, method: str = "hoeffding",
                     lead_time: int = 0) -> ConfidenceBound:
    if method not in METHODS:
        raise ValueError(f"unknown certification method {method!r}")
    if g.is_self_comparison:
        return ConfidenceBound(0.0, 0.0, 0.0, 0.0, 0.0, "self", g.m, g.bound)
    if method == "blockwise_t":
        return blockwise_t_radius(g, lead_time, N, delta)
    mu, var = replay_mean_var(g)
    rad = hoeffding_radius(g.bound, g.m, N, delta)
    return ConfidenceBound(mu, var, rad, mu - rad, mu + rad, "hoeffding", g.m, g.bound)


def default_method(window_days: int) -> str:
    return "blockwise_t" if window_days <= 150 else "hoeffding"


# ---- xi budget -----------------------------------------------------------

def xi_historical(pooled_discrepancies: Sequence[float], alpha: float) -> float:
    """Conservative (1 - alpha) quantile of past replay/deployment discrepancies."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    pool = sorted(float(x) for x in pooled_discrepancies)
    if not pool:
        warnings.warn("empty calibration pool; xi set to 0", ColdStartWarning, stacklevel=2)
        return 0.0
    return conservative_quantile(pool, 1.0 - alpha)


def fit_linear_quantile(X, y, level: float) -> np.ndarray:
    """Linear quantile regression (with intercept) solved exactly as a linear program."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    A = np.hstack([np.ones((n, 1)), X])
    p = d + 1
    # variables: beta (free), u_plus >= 0, u_minus >= 0 with A beta + u_plus - u_minus = y
    c = np.concatenate([np.zeros(p), np.full(n, level), np.full(n, 1.0 - level)])
    A_eq = np.hstack([A, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"quantile regression failed: {res.message}")
    return res.x[:p]


def xi_shift(calibration: Sequence[tuple], probe, alpha: float, inflation: float = 0.0) -> float:
    """Shift-conditioned upper quantile of the oracle budget, evaluated at ``probe``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    if inflation < 0:
        raise ValueError("inflation must be non-negative")
    pairs = list(calibration)
    if len(pairs) < 5:
        return xi_historical([xi for _, xi in pairs], alpha) + inflation if pairs else \
            xi_historical([], alpha) + inflation
    U = np.array([np.atleast_1d(np.asarray(u, dtype=float)) for u, _ in pairs])
    probe = np.atleast_1d(np.asarray(probe, dtype=float))
    if probe.shape[0] != U.shape[1]:
        raise ValueError(f"probe has dimension {probe.shape[0]}, calibration features {U.shape[1]}")
    y = np.array([float(xi) for _, xi in pairs])
    beta = fit_linear_quantile(U, y, 1.0 - alpha)
    value = float(beta[0] + probe @ beta[1:])
    return max(0.0, value + inflation)


def xi_oracle(replay_gains: Mapping, forward_gains: Mapping, beta: float = 0.0) -> float:
    """Upper quantile (max when beta = 0) of |forward - replay| over matched pairs."""
    if set(replay_gains) != set(forward_gains):
        raise ValueError("replay and forward gains must cover the same pairs")
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0,1)")
    gaps = sorted(abs(float(forward_gains[k]) - float(replay_gains[k])) for k in replay_gains)
    if not gaps:
        return 0.0
    if beta == 0.0:
        return gaps[-1]
    return conservative_quantile(gaps, 1.0 - beta)


@dataclass(frozen=True)
class XiBudget:
    xi_hist: float
    xi_shift: float
    alpha: float = 0.1
    history_periods: int = 8
    inflation: float = 0.0
    cold_start: bool = False
    xi: float = field(init=False)

    def __post_init__(self):
        if self.xi_hist < 0 or self.xi_shift < 0:
            raise ValueError("xi components must be non-negative")
        object.__setattr__(self, "xi", max(self.xi_hist, self.xi_shift))

    def to_json(self) -> dict:
        return {
            "xi": self.xi, "xi_hist": self.xi_hist, "xi_shift": self.xi_shift, "alpha": self.alpha,
            "history_periods": self.history_periods, "inflation": self.inflation, "cold_start": self.cold_start,
        }


def xi_budget(discrepancies: Sequence[float], calibration: Sequence[tuple] = (), probe=None,
              alpha: float = 0.1, inflation: float = 0.0, history_periods: int = 8) -> XiBudget:
    """Conservative combination of the historical and shift-conditioned estimates.

    Only the most recent ``history_periods`` discrepancies enter the historical pool.
    """
    pool = list(discrepancies)[-history_periods:] if history_periods else []
    cold = not pool and not calibration
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ColdStartWarning)
        hist = xi_historical(pool, alpha)
        shift = xi_shift(calibration, probe, alpha, inflation) if calibration and probe is not None else 0.0
    if cold:
        warnings.warn("no calibration data; xi budget is 0", ColdStartWarning, stacklevel=2)
    return XiBudget(hist, shift, alpha, history_periods, inflation, cold)


# ---- replay contexts -----------------------------------------------------

class InventoryReplay:
    """Replay paths built from one observed demand window.

    ``mode="daily"`` simulates each policy once over the window and uses the
    per-day costs as samples, so consecutive samples are dependent (the
    blockwise radius accounts for that). ``mode="subwindow"`` restarts every
    policy from ``init`` on overlapping sub-windows and uses each sub-window's
    average cost as one sample.
    """

    def __init__(self, demands: Sequence[float], cfg, mode: str = "daily", window: int | None = None,
                 stride: int = 1, init=None, warmup: int = 0):
        from .sim import InventoryState

        self.demands = [float(x) for x in demands]
        self.cfg = cfg
        self.lead_time = cfg.lead_time
        self.mode = mode
        self.init = init if init is not None else InventoryState.empty(cfg.lead_time)
        self.warmup = warmup
        if mode == "daily":
            if not 0 <= warmup < len(self.demands):
                raise ValueError("warmup must leave at least one replay day")
        elif mode == "subwindow":
            if window is None or not 1 <= window <= len(self.demands) or stride < 1:
                raise ValueError("subwindow mode needs 1 <= window <= len(demands) and stride >= 1")
        else:
            raise ValueError(f"unknown replay mode {mode!r}")
        self.window = window
        self.stride = stride
        self._final = {}

    @property
    def m(self) -> int:
        if self.mode == "daily":
            return len(self.demands) - self.warmup
        return (len(self.demands) - self.window) // self.stride + 1

    def path_costs(self, policy: PolicySpec) -> np.ndarray:
        from .sim import period_costs

        if self.mode == "daily":
            costs, final = period_costs(policy, self.demands, self.cfg, self.init, warmup=self.warmup)
            self._final[policy.key()] = final
            return costs
        out = []
        for start in range(0, len(self.demands) - self.window + 1, self.stride):
            seg = self.demands[start:start + self.window]
            costs, _ = period_costs(policy, seg, self.cfg, self.init, prior_demands=self.demands[:start])
            out.append(float(costs.mean()))
        return np.array(out)

    def final_state(self, policy: PolicySpec):
        """End-of-window inventory state of ``policy`` (runs the window if needed)."""
        from .sim import period_costs

        key = policy.key()
        if key not in self._final:
            _, self._final[key] = period_costs(policy, self.demands, self.cfg, self.init)
        return self._final[key]
