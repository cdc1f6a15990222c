"""Primary acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (printed live and again in the terminal
summary) and then asserts the criterion.
"""
import datetime as dt
import hashlib
import json
import logging
import math
import warnings
from pathlib import Path

import numpy as np
import pytest

from invevolve.bench import BASELINE_FAMILIES, CBS, monotone_with_slack, run_bench
from invevolve.cli import EXIT_OK, main
from invevolve.datagen.archetypes import seed_config
from invevolve.datagen.generator import generate_seed
from invevolve.datagen.slicing import EVALUATION_DAYS, HISTORY_DAYS, separated
from invevolve.datagen.workspace import build_corpus, load_workspace
from invevolve.engine import EpochConfig
from invevolve.proposers import MutationProposer, ProposerConfig
from invevolve.replay import hoeffding_radius
from invevolve.theory import PromotionHarness, RollingHarness, ratio_bound_grid, verify_promotion, verify_rolling
from invevolve.workflow import holdout_costs, safety_margin, workspace_epoch

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def bench():
    # one run of all families; baseline-only dominance is read from the same tuned costs
    return run_bench(0)


# ---- benchmark -------------------------------------------------------------------

def test_cbs_dominance(bench, criterion):
    wins = bench.baseline_winners()
    n = len(bench.results)
    ok = wins[CBS] >= 75 and n == 96
    criterion("CBS dominance", ok, f"CBS lowest among {len(BASELINE_FAMILIES)} baselines in {wins[CBS]}/{n} "
              f"(need >= 75); {wins}")
    assert ok


def test_tilted_vs_cbs(bench, criterion):
    pic = bench.wtl("TiltedPIC")
    tcbs = bench.wtl("TiltedCBS")
    ok = pic["beat_or_tie"] >= 0.85 and pic["mean_change"] <= -0.8 and tcbs["beat_or_tie"] >= 0.90
    criterion("Tilted-PIC / Tilted-CBS vs CBS", ok,
              f"TiltedPIC W/T/L {pic['W']}/{pic['T']}/{pic['L']} beat-or-tie {pic['beat_or_tie']:.1%} (>= 85%), "
              f"mean change {pic['mean_change']:+.2f}% (<= -0.8%); TiltedCBS W/T/L {tcbs['W']}/{tcbs['T']}/"
              f"{tcbs['L']} beat-or-tie {tcbs['beat_or_tie']:.1%} (>= 90%)")
    assert ok


def test_zero_loss_distributions(bench, criterion):
    losses = {d: bench.wtl("TiltedPIC", d)["L"] for d in ("geometric", "binomial", "gamma")}
    ok = all(v <= 1 for v in losses.values())
    criterion("Zero-loss distributions", ok, f"TiltedPIC losses out of 16: {losses} (need <= 1 each)")
    assert ok


def test_kp_structure(bench, criterion):
    by_l = bench.kp_by("lead_time")
    by_r = bench.kp_by("ratio")
    ok_l = monotone_with_slack(list(by_l.values()), increasing=False)
    ok_r = monotone_with_slack(list(by_r.values()), increasing=True)
    fmt = lambda d: ", ".join(f"{k}:{v:.3f}" for k, v in d.items())  # noqa: E731
    criterion("K_p structure", ok_l and ok_r,
              f"by L [{fmt(by_l)}] non-increasing={ok_l}; by p/h [{fmt(by_r)}] non-decreasing={ok_r}")
    assert ok_l and ok_r


# ---- certification ---------------------------------------------------------------

def test_hoeffding_joint_coverage(criterion):
    reps, N, m, delta, B = 10_000, 25, 50, 0.05, 1.0
    rng = np.random.default_rng(20240)
    # two-point gains at +-B are the hardest case for a range-based bound
    p_up = rng.uniform(0.05, 0.95, size=N)
    mu = B * (2 * p_up - 1)
    rad = hoeffding_radius(B, m, N, delta)
    covered = 0
    for chunk in np.array_split(np.arange(reps), 20):
        z = np.where(rng.random((chunk.size, N, m)) < p_up[None, :, None], B, -B)
        covered += int(np.all(np.abs(z.mean(axis=2) - mu) <= rad, axis=1).sum())
    freq = covered / reps
    sigma = math.sqrt(0.95 * 0.05 / reps)
    ok = freq >= 0.95 - 3 * sigma
    criterion("Hoeffding coverage", ok, f"joint coverage {freq:.4f} over {reps} reps (need >= {0.95 - 3 * sigma:.4f})")
    assert ok


# ---- theory ----------------------------------------------------------------------

def test_ratio_bound_grid(criterion):
    reports = ratio_bound_grid(trials=20, seed=0)
    bad = [r for r in reports if not r.holds]
    trials = sum(r.trials for r in reports)
    criterion("Ratio bound grid", not bad, f"{len(reports) - len(bad)}/{len(reports)} grid cells, "
              f"{trials} trials, {sum(r.failures for r in reports)} exceedances")
    assert not bad


def test_certified_promotion(criterion):
    lines, ok = [], True
    for q, J, delta in ((0.3, 10, 0.05), (0.1, 30, 0.02)):
        rep = verify_promotion(PromotionHarness(q, J, delta), trials=5000, seed=0)
        ok &= rep.holds
        lines.append(f"(q={q}, J={J}, delta={delta}) freq {rep.observed:.4f} vs bound {rep.bound:.4f} "
                     f"- 3sigma {rep.details['tolerance']:.4f}")
    criterion("Certified promotion", ok, "; ".join(lines))
    assert ok


def test_rolling_deployment(criterion):
    rep = verify_rolling(RollingHarness(), trials=2000, seed=0)
    d = rep.details
    criterion("Rolling deployment", rep.holds,
              f"P(G_T) {rep.observed:.4f} vs lower bound {rep.bound:.4f} - 3sigma {d['tolerance']:.4f}; "
              f"on {d['good_runs']} good runs: safety failures {d['safety_failures']}, "
              f"gap failures {d['gap_failures']}, min slack {d['min_gap_slack']:.4g}")
    assert rep.holds


# ---- generator -------------------------------------------------------------------

def tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def seed_invariant_problems(sid: int) -> list[str]:
    """Note sparsity and event persistence on one seed's generator diagnostics."""
    ser = generate_seed(seed_config(sid)).series
    events = ser.diagnostics["events"]
    effect = ser.diagnostics["e"]
    out = []
    onsets = {ev.onset for ev in events if ev.observed}
    noted = {i for i, n in enumerate(ser.notes) if n is not None}
    if noted != onsets:
        out.append(f"seed {sid}: notes off event onsets")
    for ev in events:
        tail = range(ev.onset + 1, min(ev.onset + ev.duration, len(ser.notes)))
        if any(ser.notes[r] is not None and r not in onsets for r in tail):
            out.append(f"seed {sid}: note repeated inside an event")
        if any(not np.any(effect[r] != 0) for r in tail):
            out.append(f"seed {sid}: event effect vanished before its duration")
    return out


def test_generator_integrity(tmp_path, criterion):
    names = build_corpus(tmp_path / "a")
    problems = []
    starts = {}
    for name in names:
        ws = load_workspace(tmp_path / "a" / name, allow_evaluation=True)
        starts.setdefault(ws.seed_id, []).append(ws.start)
        if len(ws.history) != HISTORY_DAYS or len(ws.evaluation) != EVALUATION_DAYS:
            problems.append(f"{name}: slice lengths")
        if any(n == "" for n in (*ws.history.notes, *ws.evaluation.notes)):
            problems.append(f"{name}: empty note")
    for sid, s in sorted(starts.items()):
        if len(s) != 10 or not separated(s):
            problems.append(f"seed {sid}: endpoint separation")
        problems += seed_invariant_problems(sid)
    build_corpus(tmp_path / "b")
    same = tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    ok = len(names) == 470 and len(starts) == 47 and not problems and same
    criterion("Generator integrity", ok, f"{len(names)} workspaces over {len(starts)} seeds, "
              f"{len(problems)} invariant problems {problems[:3]}, byte-identical regeneration={same}")
    assert ok


# ---- engine on workspaces --------------------------------------------------------

def sawtooth_workspace(root: Path) -> Path:
    """Demand alternating 0/20: a window-quantile rule overstocks, an order-up-to level does not."""
    d0 = dt.date(2024, 1, 1)
    rows = "".join(f"{(d0 + dt.timedelta(days=i)).isoformat()},{20 * (i % 2)}\n" for i in range(200))
    (root / "saw.csv").write_text("date,demand\n" + rows)
    assert main(["gen", "--csv", str(root / "saw.csv"), "--slices", "1", "--budget", "1",
                 "--out", str(root / "ws")]) == EXIT_OK
    (ws,) = [p for p in (root / "ws").iterdir() if p.is_dir()]
    return ws


def test_substitute_proposer_properties(tmp_path, criterion):
    # planted winner: promoted in round 1 and deployed through the CLI
    ws = sawtooth_workspace(tmp_path)
    planted = {"family": "BaseStock", "params": {"S": 70.0}}
    (tmp_path / "plant.json").write_text(json.dumps([planted]))
    rc = main(["epoch", str(ws), "--proposer", "scripted", "--fixture", str(tmp_path / "plant.json"),
               "--budget", "1", "--J", "3", "--xi", "0", "--out", str(tmp_path / "run")])
    log = json.loads((tmp_path / "run" / "epoch_log.json").read_text())
    first = log["decisions"][0]
    plant_ok = (rc == EXIT_OK and first["round"] == 1 and first["promoted"] and log["deployed"] == planted
                and log["deployment_path"] == "feasible")

    # mutation proposer: holdout safety against the certified fallback on synthetic workspaces
    names = build_corpus(tmp_path / "corpus", n_seeds=12, n_slices=2, budget=30)
    checked = nontrivial = violations = 0
    worst = -math.inf
    logging.disable(logging.WARNING)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for name in names:
                ws = load_workspace(tmp_path / "corpus" / name, allow_evaluation=True)
                # weakly tuned baselines leave room for certified improvements
                out = workspace_epoch(ws, MutationProposer(ProposerConfig("mutation", seed=0)),
                                      EpochConfig(J=60, seed=0), budget=3, seed=0, xi="auto")
                costs = holdout_costs(ws, [out.deployed, out.reference])
                excess = costs[out.deployed.key()] - costs[out.reference.key()] - safety_margin(out.log)
                worst = max(worst, excess)
                checked += 1
                nontrivial += out.deployed != out.reference
                violations += excess > 1e-9
    finally:
        logging.disable(logging.NOTSET)
    safety_ok = checked >= 10 and violations == 0
    ok = plant_ok and safety_ok
    criterion("Substitute proposers", ok,
              f"planted winner promoted in round {first['round']} and deployed={plant_ok}; mutation safety on "
              f"{checked} workspaces ({nontrivial} non-reference deployments): {violations} violations, "
              f"worst excess over 2rad+2xi {worst:+.4g}")
    assert ok
