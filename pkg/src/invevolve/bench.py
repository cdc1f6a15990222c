"""The 96-scenario capped-base-stock benchmark on stationary demand.

Each scenario (distribution x lead time x penalty ratio) samples one demand
path, tunes every policy family on it with the same budget, and compares
costs. Outputs are CSV and Markdown tables side by side.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datagen.stationary import DISTRIBUTIONS, stationary_sampler
from .fileio import atomic_write
from .policies import BASELINE_FAMILIES
from .sim import SystemConfig
from .tuner import tune_policy

LEAD_TIMES = (1, 2, 3, 4)
RATIOS = (4, 9, 19, 39)
HORIZON = 2000
BUDGET = 50
CBS = "CappedBaseStock"
TILTED = ("TiltedCBS", "TiltedPIC")
ALL_FAMILIES = BASELINE_FAMILIES + TILTED
WIN, LOSS = 0.98, 1.02


@dataclass(frozen=True)
class Scenario:
    distribution: str
    lead_time: int
    ratio: int
    horizon: int = HORIZON
    budget: int = BUDGET
    seed: int = 0

    @property
    def system(self) -> SystemConfig:
        return SystemConfig(self.lead_time, 1.0, float(self.ratio), self.horizon)

    def path_seed(self, j: int) -> int:
        return self.seed + 7919 * j


def scenarios(rng_seed: int = 0, horizon: int = HORIZON, budget: int = BUDGET) -> list[Scenario]:
    out = []
    for di, L, ratio in itertools.product(range(len(DISTRIBUTIONS)), LEAD_TIMES, RATIOS):
        seed = 1000 * di + 100 * L + ratio + 100_000 * rng_seed
        out.append(Scenario(DISTRIBUTIONS[di], L, ratio, horizon, budget, seed))
    return out


def verdict(cost: float, cbs_cost: float) -> str:
    if cost < WIN * cbs_cost:
        return "W"
    if cost > LOSS * cbs_cost:
        return "L"
    return "T"


@dataclass
class ScenarioResult:
    scenario: Scenario
    costs: dict
    params: dict  # family -> list of tuned parameter dicts, one per path

    def kp(self) -> float | None:
        fits = self.params.get("TiltedPIC")
        return float(np.mean([p["K_p"] for p in fits])) if fits else None


def run_scenario(scn: Scenario, families: Sequence[str] = ALL_FAMILIES, paths: int = 1) -> ScenarioResult:
    costs = {f: [] for f in families}
    params = {f: [] for f in families}
    for j in range(paths):
        seed = scn.path_seed(j)
        demand = stationary_sampler(scn.distribution, scn.horizon, seed)
        for f in families:
            res = tune_policy(f, demand, scn.system, scn.budget, seed)
            costs[f].append(res.best_cost)
            params[f].append(dict(res.best_params))
    return ScenarioResult(scn, {f: float(np.mean(v)) for f, v in costs.items()}, params)


def _run(args):
    scn, families, paths = args
    return run_scenario(scn, families, paths)


@dataclass(frozen=True)
class WTLRecord:
    scenario: Scenario
    policy: str
    cost: float
    cbs_cost: float

    @property
    def change(self) -> float:
        return 100.0 * (self.cost / self.cbs_cost - 1.0)

    @property
    def verdict(self) -> str:
        return verdict(self.cost, self.cbs_cost)


@dataclass
class BenchResult:
    results: list
    families: tuple
    meta: dict = field(default_factory=dict)

    def baseline_winners(self, rel_tol: float = 1e-9) -> dict:
        """Per baseline family, the number of scenarios in which it has the lowest cost (ties shared)."""
        fams = [f for f in BASELINE_FAMILIES if f in self.families]
        counts = dict.fromkeys(fams, 0)
        for r in self.results:
            best = min(r.costs[f] for f in fams)
            for f in fams:
                if r.costs[f] <= best * (1 + rel_tol):
                    counts[f] += 1
        return counts

    def records(self, policy: str) -> list[WTLRecord]:
        return [WTLRecord(r.scenario, policy, r.costs[policy], r.costs[CBS]) for r in self.results]

    def wtl(self, policy: str, distribution: str | None = None) -> dict:
        recs = [x for x in self.records(policy) if distribution in (None, x.scenario.distribution)]
        out = {"W": 0, "T": 0, "L": 0}
        for x in recs:
            out[x.verdict] += 1
        out["beat_or_tie"] = (out["W"] + out["T"]) / len(recs) if recs else math.nan
        out["mean_change"] = float(np.mean([x.change for x in recs])) if recs else math.nan
        return out

    def kp_by(self, attr: str) -> dict:
        groups = {}
        for r in self.results:
            k = r.kp()
            if k is not None:
                groups.setdefault(getattr(r.scenario, attr), []).append(k)
        return {key: float(np.mean(v)) for key, v in sorted(groups.items())}


def run_bench(rng_seed: int = 0, families: Sequence[str] = ALL_FAMILIES, jobs: int = 1, paths: int = 1,
              horizon: int = HORIZON, budget: int = BUDGET, subset: Sequence[Scenario] | None = None) -> BenchResult:
    if paths < 1:
        raise ValueError("paths must be at least 1")
    if CBS not in families:
        raise ValueError("the benchmark compares against CappedBaseStock; include it")
    scns = list(subset) if subset is not None else scenarios(rng_seed, horizon, budget)
    tasks = [(s, tuple(families), paths) for s in scns]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run, tasks, chunksize=1))
    else:
        results = [_run(t) for t in tasks]
    return BenchResult(results, tuple(families),
                       {"rng_seed": rng_seed, "paths": paths, "horizon": horizon, "budget": budget})


# ---- tables --------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}" if math.isfinite(x) else "nan"
    return str(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _md(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(_fmt(x) for x in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def tables(bench: BenchResult) -> dict:
    """name -> (header, rows) for every emitted table."""
    out = {}
    fams = bench.families
    out["scenarios"] = (
        ["distribution", "lead_time", "ratio", "seed", *fams, "K_p"],
        [[r.scenario.distribution, r.scenario.lead_time, r.scenario.ratio, r.scenario.seed,
          *(r.costs[f] for f in fams), r.kp() if r.kp() is not None else ""] for r in bench.results],
    )
    wins = bench.baseline_winners()
    n = len(bench.results)
    out["baseline_dominance"] = (["policy", "lowest_cost_count", "share"],
                                 [[f, c, c / n if n else math.nan] for f, c in wins.items()])
    tilted = [p for p in TILTED if p in fams]
    if tilted:
        out["wtl_vs_cbs"] = (
            ["policy", "W", "T", "L", "beat_or_tie", "mean_change_pct"],
            [[p, *(bench.wtl(p)[k] for k in ("W", "T", "L", "beat_or_tie", "mean_change"))] for p in tilted],
        )
        rows = []
        for dist in DISTRIBUTIONS:
            for p in tilted:
                s = bench.wtl(p, dist)
                if s["W"] + s["T"] + s["L"]:
                    rows.append([dist, p, s["W"], s["T"], s["L"], s["mean_change"]])
        out["wtl_by_distribution"] = (["distribution", "policy", "W", "T", "L", "mean_change_pct"], rows)
    if "TiltedPIC" in fams:
        out["kp_by_lead_time"] = (["lead_time", "mean_K_p"], [[k, v] for k, v in bench.kp_by("lead_time").items()])
        out["kp_by_ratio"] = (["ratio", "mean_K_p"], [[k, v] for k, v in bench.kp_by("ratio").items()])
    return out



def write_tables(bench: BenchResult, out_dir, svg: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for name, (header, rows) in tables(bench).items():
        for ext, text in (("csv", _csv(header, rows)), ("md", _md(header, rows))):
            path = out_dir / f"{name}.{ext}"
            atomic_write(path, text)
            written.append(path)
    meta = out_dir / "bench_meta.json"
    atomic_write(meta, json.dumps(bench.meta, sort_keys=True, indent=2) + "\n")
    written.append(meta)
    if svg:
        written += write_svg(bench, out_dir)
    return written


def write_svg(bench: BenchResult, out_dir) -> list[Path]:
    """Line charts of mean K_p against lead time and penalty ratio (needs matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "invevolve"
    written = []
    for attr, label in (("lead_time", "lead time"), ("ratio", "p/h")):
        data = bench.kp_by(attr)
        if not data:
            continue
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.plot(list(data), list(data.values()), marker="o")
        ax.set_xlabel(label)
        ax.set_ylabel("mean tuned K_p")
        fig.tight_layout()
        path = Path(out_dir) / f"kp_by_{attr}.svg"
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written


def monotone_with_slack(values: Sequence[float], increasing: bool, slack: float = 0.05,
                        allowed: int = 1) -> bool:
    """Monotone trend allowing up to ``allowed`` adjacent reversals no larger than ``slack``."""
    bad = 0
    for a, b in zip(values, values[1:]):
        step = b - a if increasing else a - b
        if step < 0:
            if -step > slack:
                return False
            bad += 1
    return bad <= allowed
