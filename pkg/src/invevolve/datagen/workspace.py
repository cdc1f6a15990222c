"""Workspace slices: packaging, on-disk layout, loading and corpus construction.

A workspace directory holds::

    problem_description.md
    config.json
    data/historical_sequence.json     100 observed days
    data/evaluation_sequence.json     30 holdout days (sealed for the engine)
    baseline_policies/<family>.json   tuned baselines
    calibration.json                  discrepancy records from earlier slices (optional)
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..fileio import atomic_write
from ..policies import BASELINE_FAMILIES, PolicySpec
from ..sim import SystemConfig, average_cost, period_costs
from ..tuner import tune_policy
from .archetypes import seed_config
from .generator import SeedDataset, generate_seed
from .slicing import EVALUATION_DAYS, HISTORY_DAYS, SLICE_DAYS, slice_starts

log = logging.getLogger(__name__)

WORKSPACE_SCHEMA = 1
DEFAULT_LEAD_TIME = 5
DEFAULT_HOLDING = 1.0
DEFAULT_PENALTY = 10.0
DEFAULT_SEEDS = 47
DEFAULT_SLICES = 10
FEATURE_DECIMALS = 4


class WorkspaceError(ValueError):
    pass


class EvaluationSealed(PermissionError):
    """Raised when the holdout window is requested without permission."""


@dataclass(frozen=True)
class DayRecords:
    dates: tuple
    demand: tuple
    notes: tuple
    features: Mapping = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.dates)
        if len(self.demand) != n or len(self.notes) != n or any(len(v) != n for v in self.features.values()):
            raise WorkspaceError("day records must have equal lengths")

    def __len__(self):
        return len(self.dates)

    def to_json(self) -> list:
        out = []
        for i, d in enumerate(self.dates):
            rec = {"date": d, "demand": self.demand[i],
                   "features": {k: v[i] for k, v in self.features.items()}}
            if self.notes[i] is not None:
                rec["note"] = self.notes[i]
            out.append(rec)
        return out

    @classmethod
    def from_json(cls, records: Sequence[Mapping]) -> "DayRecords":
        try:
            dates = tuple(str(r["date"]) for r in records)
            demand = tuple(r["demand"] for r in records)
        except (KeyError, TypeError) as exc:
            raise WorkspaceError(f"malformed day record: {exc}") from exc
        for x in demand:
            if not isinstance(x, (int, float)) or isinstance(x, bool) or x < 0 or not math.isfinite(x):
                raise WorkspaceError(f"demand must be a non-negative number, got {x!r}")
        notes = tuple(r.get("note") for r in records)
        names = sorted(records[0].get("features", {})) if records else []
        feats = {}
        for k in names:
            try:
                feats[k] = tuple(r["features"][k] for r in records)
            except KeyError as exc:
                raise WorkspaceError(f"feature {k!r} missing on some days") from exc
        return cls(dates, demand, notes, feats)

    def part(self, lo: int, hi: int) -> "DayRecords":
        return DayRecords(self.dates[lo:hi], self.demand[lo:hi], self.notes[lo:hi],
                          {k: v[lo:hi] for k, v in self.features.items()})


@dataclass(frozen=True)
class WorkspaceSlice:
    seed_id: int
    start: int
    history: DayRecords
    holdout: DayRecords | None
    lead_time: int = DEFAULT_LEAD_TIME
    holding_cost: float = DEFAULT_HOLDING
    penalty_cost: float = DEFAULT_PENALTY
    baselines: tuple = ()
    meta: Mapping = field(default_factory=dict)
    calibration: tuple = ()

    @property
    def evaluation(self) -> DayRecords:
        if self.holdout is None:
            raise EvaluationSealed("the evaluation window is sealed for this workspace handle")
        return self.holdout

    @property
    def system(self) -> SystemConfig:
        return SystemConfig(self.lead_time, self.holding_cost, self.penalty_cost)

    @property
    def history_demand(self) -> list:
        return [float(x) for x in self.history.demand]

    def sealed(self) -> "WorkspaceSlice":
        return WorkspaceSlice(self.seed_id, self.start, self.history, None, self.lead_time, self.holding_cost,
                              self.penalty_cost, self.baselines, self.meta, self.calibration)

    def with_(self, **changes) -> "WorkspaceSlice":
        from dataclasses import replace

        return replace(self, **changes)


def _demand_value(x: float, integer: bool):
    return int(round(x)) if integer else round(float(x), 3)


def records_from_dataset(ds: SeedDataset) -> DayRecords:
    integer = ds.config.integer_demand
    cov = ds.covariates
    feats = {k: tuple(round(float(v), FEATURE_DECIMALS) for v in cov.columns[k]) for k in sorted(cov.retained)}
    return DayRecords(
        tuple(d.isoformat() for d in cov.dates),
        tuple(_demand_value(x, integer) for x in ds.demand),
        tuple(ds.series.notes),
        feats,
    )


def make_slice(records: DayRecords, seed_id: int, start: int, lead_time=DEFAULT_LEAD_TIME,
               holding_cost=DEFAULT_HOLDING, penalty_cost=DEFAULT_PENALTY, meta=None) -> WorkspaceSlice:
    if start < 0 or start + SLICE_DAYS > len(records):
        raise WorkspaceError(f"slice at {start} does not fit a series of {len(records)} days")
    window = records.part(start, start + SLICE_DAYS)
    return WorkspaceSlice(seed_id, start, window.part(0, HISTORY_DAYS), window.part(HISTORY_DAYS, SLICE_DAYS),
                          lead_time, float(holding_cost), float(penalty_cost), (), dict(meta or {}))


def slice_dataset(ds: SeedDataset, n_slices: int, seed: int = 0, **params) -> list[WorkspaceSlice]:
    records = records_from_dataset(ds)
    cfg = ds.config
    meta = {"archetype": cfg.archetype, "domain": cfg.domain, "demand_family": cfg.family}
    starts = slice_starts(len(records), n_slices, seed=seed * 1009 + cfg.seed_id)
    return [make_slice(records, cfg.seed_id, s, meta=meta, **params) for s in starts]


# ---- baselines and calibration --------------------------------------------

def tune_baselines(demands: Sequence[float], system: SystemConfig, budget: int = 50, seed: int = 0,
                   families: Sequence[str] = BASELINE_FAMILIES) -> tuple:
    return tuple(tune_policy(f, demands, system, budget, seed).best_policy for f in families)


def choose_reference(baselines: Sequence[PolicySpec], demands: Sequence[float], system: SystemConfig) -> PolicySpec:
    """Baseline with the lowest average cost on the history (first wins ties)."""
    costs = [average_cost(b, demands, system) for b in baselines]
    return baselines[int(np.argmin(costs))]


def shift_features(demands: Sequence[float]) -> list[float]:
    """Probe features for the shift-conditioned budget: [cv, 28-day trend / mean]."""
    from ..proposers import demand_summary

    s = demand_summary(demands)
    return [s["cv"], s["trend_28"] / s["mean"] if s["mean"] > 0 else 0.0]


def oracle_discrepancy(ws: WorkspaceSlice) -> float:
    """Largest |forward gain - replay gain| over the tuned baselines versus the reference.

    Replay gains are average history costs; forward gains continue each
    policy from its end-of-history state through the holdout window.
    """
    hist = ws.history_demand
    future = [float(x) for x in ws.evaluation.demand]
    sys_ = ws.system
    if not ws.baselines:
        raise WorkspaceError("oracle discrepancy needs tuned baselines")
    ref = choose_reference(ws.baselines, hist, sys_)
    rep, fwd = {}, {}
    for b in ws.baselines:
        c_hist, final = period_costs(b, hist, sys_)
        c_fut, _ = period_costs(b, future, sys_, final, prior_demands=hist)
        rep[b.key()] = c_hist.mean()
        fwd[b.key()] = c_fut.mean()
    r = ref.key()
    return max(abs((fwd[r] - fwd[k]) - (rep[r] - rep[k])) for k in rep)


def attach_calibration(slices: Sequence[WorkspaceSlice]) -> list[WorkspaceSlice]:
    """Give each slice the discrepancy records of same-seed slices that ended before its history did."""
    records = []
    for ws in slices:
        records.append({
            "start": ws.start, "end": ws.start + SLICE_DAYS - 1,
            "u": shift_features(ws.history_demand), "xi_oracle": oracle_discrepancy(ws),
        })
    out = []
    for ws in slices:
        now = ws.start + HISTORY_DAYS - 1
        past = tuple(sorted((r for r in records if r["end"] < now), key=lambda r: (r["end"], r["start"])))
        out.append(ws.with_(calibration=past))
    return out


# ---- disk layout -----------------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _description(ws: WorkspaceSlice) -> str:
    m = ws.meta
    item = m.get("archetype", "item").replace("_", " ")
    lines = [
        f"# Inventory problem: {item}",
        "",
        f"Daily replenishment for one SKU ({item}, {m.get('domain', 'unspecified')} domain).",
        "Unmet demand is lost. Orders arrive after the lead time.",
        "",
        "| parameter | value |",
        "|---|---|",
        f"| lead time (days) | {ws.lead_time} |",
        f"| holding cost per unit-day | {ws.holding_cost:g} |",
        f"| lost-sales penalty per unit | {ws.penalty_cost:g} |",
        f"| history days | {len(ws.history)} |",
        f"| evaluation days | {EVALUATION_DAYS} |",
        "",
        "Features: " + (", ".join(sorted(ws.history.features)) or "none") + ".",
        "",
    ]
    return "\n".join(lines)


def config_json(ws: WorkspaceSlice) -> dict:
    return {
        "schema_version": WORKSPACE_SCHEMA,
        "seed_id": ws.seed_id,
        "start_index": ws.start,
        "start_date": ws.history.dates[0] if len(ws.history) else None,
        "history_days": len(ws.history),
        "evaluation_days": EVALUATION_DAYS if ws.holdout is None else len(ws.holdout),
        "lead_time": ws.lead_time,
        "holding_cost": ws.holding_cost,
        "penalty_cost": ws.penalty_cost,
        "features": sorted(ws.history.features),
        "baselines": [f"{b.family}.json" for b in ws.baselines],
        "meta": dict(ws.meta),
    }


def emit_workspace(ws: WorkspaceSlice, directory) -> Path:
    root = Path(directory)
    try:
        atomic_write(root / "problem_description.md", _description(ws))
        atomic_write(root / "config.json", _dump(config_json(ws)))
        atomic_write(root / "data" / "historical_sequence.json", _dump(ws.history.to_json()))
        atomic_write(root / "data" / "evaluation_sequence.json", _dump(ws.evaluation.to_json()))
        for b in ws.baselines:
            atomic_write(root / "baseline_policies" / f"{b.family}.json", _dump(b.to_json()))
        if ws.calibration:
            atomic_write(root / "calibration.json", _dump({"records": list(ws.calibration)}))
    except OSError as exc:
        raise OSError(f"cannot write workspace at {root}: {exc}") from exc
    return root


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise WorkspaceError(f"{path} is not valid JSON: {exc}") from exc


def load_workspace(directory, allow_evaluation: bool = False) -> WorkspaceSlice:
    """Load a workspace; the holdout file is only opened when ``allow_evaluation`` is set."""
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"workspace directory {root} does not exist")
    try:
        cfg = _read_json(root / "config.json")
        hist = DayRecords.from_json(_read_json(root / "data" / "historical_sequence.json"))
        holdout = None
        if allow_evaluation:
            holdout = DayRecords.from_json(_read_json(root / "data" / "evaluation_sequence.json"))
        baselines = tuple(PolicySpec.from_json(_read_json(root / "baseline_policies" / name))
                          for name in cfg.get("baselines", []))
        calib_path = root / "calibration.json"
        calibration = tuple(_read_json(calib_path)["records"]) if calib_path.exists() else ()
    except FileNotFoundError as exc:
        raise WorkspaceError(f"incomplete workspace at {root}: missing {exc.filename}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, WorkspaceError):
            raise
        raise WorkspaceError(f"invalid workspace at {root}: {exc}") from exc
    if cfg.get("schema_version") != WORKSPACE_SCHEMA:
        raise WorkspaceError(f"unsupported workspace schema {cfg.get('schema_version')!r}")
    try:
        ws = WorkspaceSlice(int(cfg["seed_id"]), int(cfg["start_index"]), hist, holdout, int(cfg["lead_time"]),
                            float(cfg["holding_cost"]), float(cfg["penalty_cost"]), baselines,
                            dict(cfg.get("meta", {})), calibration)
        ws.system  # validates cost parameters
    except (KeyError, ValueError) as exc:
        raise WorkspaceError(f"invalid config.json at {root}: {exc}") from exc
    return ws


# ---- corpus ------------------------------------------------------------------

def workspace_name(ws: WorkspaceSlice) -> str:
    return f"seed{ws.seed_id:03d}_start{ws.start:03d}"


def build_seed_workspaces(seed_id: int, n_slices: int = DEFAULT_SLICES, rng_seed: int = 0, budget: int = 50,
                          **params) -> list[WorkspaceSlice]:
    ds = generate_seed(seed_config(seed_id, rng_seed), rng_seed)
    slices = slice_dataset(ds, n_slices, seed=rng_seed, **params)
    tuned = [ws.with_(baselines=tune_baselines(ws.history_demand, ws.system, budget, rng_seed)) for ws in slices]
    return attach_calibration(tuned)


def _emit_seed(args):
    seed_id, n_slices, rng_seed, budget, out = args
    names = []
    for ws in build_seed_workspaces(seed_id, n_slices, rng_seed, budget):
        name = workspace_name(ws)
        emit_workspace(ws, Path(out) / name)
        names.append(name)
    return names


def build_corpus(out, n_seeds: int = DEFAULT_SEEDS, n_slices: int = DEFAULT_SLICES, rng_seed: int = 0,
                 budget: int = 50, jobs: int = 1) -> list[str]:
    """Generate, slice, tune and emit every workspace; returns workspace names in seed order."""
    tasks = [(s, n_slices, rng_seed, budget, str(out)) for s in range(n_seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_emit_seed, tasks))
    else:
        results = [_emit_seed(t) for t in tasks]
    names = [n for r in results for n in r]
    atomic_write(Path(out) / "index.json", _dump({"workspaces": names, "rng_seed": rng_seed,
                                                   "seeds": n_seeds, "slices": n_slices}))
    return names


def csv_to_workspaces(path, out, n_slices: int = 1, seed: int = 0, date_col: str = "date",
                      demand_col: str = "demand", note_col: str = "note", lead_time: int = DEFAULT_LEAD_TIME,
                      holding_cost: float = DEFAULT_HOLDING, penalty_cost: float = DEFAULT_PENALTY,
                      budget: int = 50) -> list[str]:
    """Turn a daily CSV (date, demand, optional note, numeric feature columns) into workspaces."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise WorkspaceError(f"{path} has no rows")
    for col in (date_col, demand_col):
        if col not in rows[0]:
            raise WorkspaceError(f"{path} lacks a {col!r} column")
    rows.sort(key=lambda r: r[date_col])
    dates = tuple(dt.date.fromisoformat(r[date_col]).isoformat() for r in rows)
    raw = [float(r[demand_col]) for r in rows]
    integer = all(x == int(x) for x in raw)
    demand = tuple(_demand_value(x, integer) for x in raw)
    notes = tuple((r.get(note_col) or None) for r in rows)
    feats = {}
    for col in rows[0]:
        if col in (date_col, demand_col, note_col):
            continue
        try:
            feats[col] = tuple(round(float(r[col]), FEATURE_DECIMALS) for r in rows)
        except (TypeError, ValueError):
            log.info("skipping non-numeric column %s", col)
    records = DayRecords(dates, demand, notes, dict(sorted(feats.items())))
    starts = slice_starts(len(records), n_slices, seed=seed)
    meta = {"archetype": Path(path).stem, "domain": "external", "demand_family": "observed"}
    slices = [make_slice(records, 0, s, lead_time, holding_cost, penalty_cost, meta) for s in starts]
    slices = [ws.with_(baselines=tune_baselines(ws.history_demand, ws.system, budget, seed)) for ws in slices]
    names = []
    for ws in attach_calibration(slices):
        name = f"{Path(path).stem}_start{ws.start:04d}"
        emit_workspace(ws, Path(out) / name)
        names.append(name)
    return names
