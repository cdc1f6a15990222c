"""Per-workspace pipeline: tune baselines, certify proposals on the history, score the holdout."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

from .datagen.workspace import WorkspaceSlice, choose_reference, shift_features, tune_baselines
from .engine import EpochConfig, EpochLog, run_epoch
from .policies import PolicySpec, canonicalize
from .proposers import demand_summary
from .replay import ColdStartWarning, XiBudget, xi_budget
from .sim import period_costs

log = logging.getLogger(__name__)


def auto_xi(ws: WorkspaceSlice, alpha: float = 0.1, history_periods: int = 8) -> XiBudget:
    """Budget from the workspace's calibration records (strictly earlier slices)."""
    records = sorted(ws.calibration, key=lambda r: (r["end"], r["start"]))
    discrepancies = [float(r["xi_oracle"]) for r in records]
    calibration = [(r["u"], float(r["xi_oracle"])) for r in records]
    probe = shift_features(ws.history_demand)
    return xi_budget(discrepancies, calibration, probe, alpha=alpha, history_periods=history_periods)


@dataclass
class EpochOutcome:
    deployed: PolicySpec
    log: EpochLog
    baselines: tuple
    reference: PolicySpec
    xi: XiBudget | None = None
    extra: dict = field(default_factory=dict)


def workspace_epoch(ws: WorkspaceSlice, proposer, cfg: EpochConfig, budget: int = 50, seed: int = 0,
                    xi: str | float = 0.0) -> EpochOutcome:
    """Run one certified epoch on the 100-day history of a workspace.

    ``xi="auto"`` derives the budget from calibration records; a cold start
    (none available) gives 0 with a warning.
    """
    from dataclasses import replace

    from .replay import InventoryReplay

    hist = ws.history_demand
    system = ws.system
    # the engine works on the canonical grid, so report the same specs it ran
    baselines = tuple(canonicalize(b) for b in tune_baselines(hist, system, budget, seed))
    reference = choose_reference(baselines, hist, system)
    budget_info = None
    if xi == "auto":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ColdStartWarning)
            budget_info = auto_xi(ws)
        for w in caught:
            log.warning("%s", w.message)
        cfg = replace(cfg, xi=budget_info.xi)
    else:
        cfg = replace(cfg, xi=float(xi))
    replay = InventoryReplay(hist, system, mode="daily")
    summary = demand_summary(hist, ws.lead_time, ws.holding_cost, ws.penalty_cost)
    deployed, epoch_log = run_epoch(replay, baselines, None, reference, proposer, cfg, summary)
    epoch_log.extra["workspace"] = {"seed_id": ws.seed_id, "start_index": ws.start}
    if budget_info is not None:
        epoch_log.extra["xi_budget"] = budget_info.to_json()
    return EpochOutcome(deployed, epoch_log, baselines, reference, budget_info)


def holdout_costs(ws: WorkspaceSlice, policies: Sequence[PolicySpec]) -> dict:
    """Average holdout cost per policy, continuing each from its own end-of-history state."""
    hist = ws.history_demand
    future = [float(x) for x in ws.evaluation.demand]
    out = {}
    for p in policies:
        _, final = period_costs(p, hist, ws.system)
        costs, _ = period_costs(p, future, ws.system, final, prior_demands=hist)
        out[p.key()] = float(costs.sum() / len(future))
    return out


def evaluation_report(ws: WorkspaceSlice, candidate: PolicySpec, baselines: Sequence[PolicySpec]) -> dict:
    """Holdout cost of ``candidate`` against the best baseline; success means strictly lower."""
    costs = holdout_costs(ws, [candidate, *baselines])
    base = {b.family: costs[b.key()] for b in baselines}
    best_family = min(base, key=lambda f: (base[f], f))
    best = base[best_family]
    c = costs[candidate.key()]
    return {
        "policy": candidate.to_json(),
        "policy_cost": c,
        "baseline_costs": base,
        "best_baseline": best_family,
        "best_baseline_cost": best,
        "relative_change_pct": 100.0 * (c / best - 1.0) if best > 0 else (0.0 if c == best else float("inf")),
        "success": bool(c < best),
        "evaluation_days": len(ws.evaluation),
    }


def safety_margin(epoch_log: EpochLog) -> float:
    """Realized 2*rad + 2*xi for the deployed policy against the reference (0 on fallback)."""
    if epoch_log.deployment_path != "feasible":
        return 0.0
    dep, ref = epoch_log.deployed, epoch_log.reference
    if dep == ref:
        return 0.0
    for s in epoch_log.stats:
        if s["candidate"] == dep and s["comparator"] == ref:
            return 2 * float(s["radius"]) + 2 * float(epoch_log.config["xi"])
    raise KeyError("deployed policy was never compared with the reference")
