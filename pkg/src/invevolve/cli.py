"""Command-line entry point: ``invevolve {gen,epoch,cbs-bench,eval,theory}``.

Exit codes: 0 success, 1 validation error, 2 guarantee violation, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .fileio import atomic_write

log = logging.getLogger("invevolve")

EXIT_OK, EXIT_VALIDATION, EXIT_VIOLATION, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors are validation errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---- gen -------------------------------------------------------------------------

def cmd_gen(args) -> int:
    from .datagen.workspace import build_corpus, csv_to_workspaces

    out = Path(args.out)
    if args.csv:
        names = csv_to_workspaces(args.csv, out, n_slices=args.slices, seed=args.rng_seed, budget=args.budget,
                                  lead_time=args.lead_time, holding_cost=args.holding_cost,
                                  penalty_cost=args.penalty_cost)
    else:
        names = build_corpus(out, n_seeds=args.seeds, n_slices=args.slices, rng_seed=args.rng_seed,
                             budget=args.budget, jobs=args.jobs)
    print(f"wrote {len(names)} workspaces to {out}")
    return EXIT_OK


# ---- epoch -----------------------------------------------------------------------

def _load_fixture(path):
    """Scripted proposals: a JSON list of policies, or {"policies": [...], "weights": [...]}."""
    from .policies import PolicySpec
    from .proposers import InvalidProposal

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    items, weights = (doc, None) if isinstance(doc, list) else (doc.get("policies", []), doc.get("weights"))
    out = []
    for item in items:
        try:
            out.append(PolicySpec.from_json(item))
        except ValueError as exc:
            out.append(InvalidProposal(str(exc)))
    return out, weights


def _proposer(args):
    from .proposers import ExternalProposer, MutationProposer, ProposerConfig, ScriptedProposer

    if args.proposer == "mutation":
        return MutationProposer(ProposerConfig("mutation", seed=args.rng_seed))
    if args.proposer == "scripted":
        if not args.fixture:
            raise UsageError("--proposer scripted needs --fixture")
        items, weights = _load_fixture(args.fixture)
        return ScriptedProposer(items, weights, seed=args.rng_seed)
    return ExternalProposer(args.url, timeout=args.timeout)


def _parse_xi(text: str):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"--xi must be 'auto' or a number, got {text!r}") from None
    if value < 0:
        raise UsageError("--xi must be non-negative")
    return value


def cmd_epoch(args) -> int:
    from .datagen.workspace import load_workspace
    from .engine import EpochConfig
    from .workflow import workspace_epoch

    cert = {"hoeffding": "hoeffding", "blockt": "blockwise_t"}[args.cert]
    cfg = EpochConfig(J=args.J, epsilon=args.epsilon, delta=args.delta, cert_method=cert, seed=args.rng_seed)
    ws = load_workspace(args.workspace, allow_evaluation=False)
    outcome = workspace_epoch(ws, _proposer(args), cfg, budget=args.budget, seed=args.rng_seed,
                              xi=_parse_xi(args.xi))
    out = Path(args.out)
    atomic_write(out / "epoch_log.json", outcome.log.dumps())
    atomic_write(out / "deployed_policy.json", _dump(outcome.deployed.to_json()))
    print(f"deployed {outcome.deployed!r} via {outcome.log.deployment_path} "
          f"({outcome.log.evaluations_used}/{outcome.log.budget} evaluations)")
    return EXIT_OK


# ---- cbs-bench -------------------------------------------------------------------

def cmd_cbs_bench(args) -> int:
    from .bench import ALL_FAMILIES, BASELINE_FAMILIES, TILTED, run_bench, write_tables

    families = BASELINE_FAMILIES if args.baselines_only else ALL_FAMILIES
    bench = run_bench(args.rng_seed, families, jobs=args.jobs, paths=args.paths, horizon=args.horizon,
                      budget=args.budget)
    write_tables(bench, args.out, svg=args.svg)
    wins = bench.baseline_winners()
    print(f"CBS lowest among baselines in {wins['CappedBaseStock']}/{len(bench.results)} scenarios")
    for p in TILTED:
        if p in families:
            s = bench.wtl(p)
            print(f"{p} vs CBS: W/T/L {s['W']}/{s['T']}/{s['L']}, mean change {s['mean_change']:+.2f}%")
    return EXIT_OK


# ---- eval ------------------------------------------------------------------------

def cmd_eval(args) -> int:
    from .datagen.workspace import load_workspace, tune_baselines
    from .policies import PolicySpec, check_validity
    from .workflow import evaluation_report

    ws = load_workspace(args.workspace, allow_evaluation=True)
    doc = json.loads(Path(args.policy).read_text(encoding="utf-8"))
    spec = PolicySpec.from_json(doc.get("policy", doc) if isinstance(doc, dict) else doc)
    report = check_validity(spec, cfg=ws.system)
    if not report.valid:
        raise UsageError(f"policy is not valid: {'; '.join(report.violations)}")
    baselines = ws.baselines or tune_baselines(ws.history_demand, ws.system, args.budget, args.rng_seed)
    result = evaluation_report(ws, spec, baselines)
    atomic_write(Path(args.out) / "eval_report.json", _dump(result))
    print(f"holdout avg cost {result['policy_cost']:.4f} vs best baseline {result['best_baseline']} "
          f"{result['best_baseline_cost']:.4f} ({result['relative_change_pct']:+.2f}%)"
          f"{' success' if result['success'] else ''}")
    return EXIT_OK


# ---- theory ----------------------------------------------------------------------

def cmd_theory(args) -> int:
    from . import theory

    trials = args.trials
    reports = []
    if args.suite in ("all", "ratio"):
        reports += theory.ratio_bound_grid(trials or 20, args.rng_seed)
    if args.suite in ("all", "promotion"):
        for q, J, delta in ((0.3, 10, 0.05), (0.1, 30, 0.02)):
            h = theory.PromotionHarness(q, J, delta)
            reports.append(theory.verify_promotion(h, trials or 5000, args.rng_seed, args.inject_gate_bug))
    if args.suite in ("all", "rolling"):
        reports.append(theory.verify_rolling(theory.RollingHarness(), trials or 2000, args.rng_seed,
                                              args.inject_gate_bug))
    out = Path(args.out)
    atomic_write(out / "guarantee_reports.json", theory.reports_json(reports))
    atomic_write(out / "guarantee_reports.md", theory.reports_markdown(reports))
    failed = [r for r in reports if not r.holds]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks hold")
    for r in failed:
        print(f"VIOLATED: {r.name} {r.params} observed={r.observed:.6g} bound={r.bound:.6g}")
    return EXIT_VIOLATION if failed else EXIT_OK


# ---- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--rng-seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--out", default=".", help="output directory (default .)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="invevolve", description="Certified inventory policy search toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="generate seed datasets and workspaces")
    g.add_argument("--seeds", type=int, default=47)
    g.add_argument("--slices", type=int, default=10)
    g.add_argument("--budget", type=int, default=50, help="baseline tuning trials")
    g.add_argument("--csv", help="build workspaces from a daily CSV instead of synthetic seeds")
    g.add_argument("--lead-time", type=int, default=5)
    g.add_argument("--holding-cost", type=float, default=1.0)
    g.add_argument("--penalty-cost", type=float, default=10.0)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("epoch", parents=[common], help="run one certified epoch on a workspace")
    e.add_argument("workspace")
    e.add_argument("--budget", type=int, default=50, help="baseline tuning trials")
    e.add_argument("--proposer", choices=("mutation", "scripted", "external"), default="mutation")
    e.add_argument("--fixture", help="JSON proposals for the scripted proposer")
    e.add_argument("--url", help="external proposer endpoint")
    e.add_argument("--timeout", type=float, default=120.0)
    e.add_argument("--J", type=int, default=60, help="proposal rounds")
    e.add_argument("--epsilon", type=float, default=0.05)
    e.add_argument("--delta", type=float, default=0.05)
    e.add_argument("--xi", default="auto", help="'auto' or a non-negative number")
    e.add_argument("--cert", choices=("hoeffding", "blockt"), default="blockt")
    e.set_defaults(func=cmd_epoch)

    b = sub.add_parser("cbs-bench", parents=[common], help="96-scenario comparison against capped base stock")
    b.add_argument("--baselines-only", action="store_true")
    b.add_argument("--paths", type=int, default=1, help="demand paths averaged per scenario")
    b.add_argument("--horizon", type=int, default=2000)
    b.add_argument("--budget", type=int, default=50)
    b.add_argument("--svg", action="store_true", help="also render K_p charts (needs matplotlib)")
    b.set_defaults(func=cmd_cbs_bench)

    v = sub.add_parser("eval", parents=[common], help="score a policy on a workspace holdout")
    v.add_argument("workspace")
    v.add_argument("policy", help="policy JSON file")
    v.add_argument("--budget", type=int, default=50, help="tuning trials when the workspace lacks baselines")
    v.set_defaults(func=cmd_eval)

    t = sub.add_parser("theory", parents=[common], help="numerical guarantee checks")
    t.add_argument("--trials", type=int, default=None, help="override every Monte Carlo size")
    t.add_argument("--suite", choices=("all", "ratio", "promotion", "rolling"), default="all")
    t.add_argument("--inject-gate-bug", action="store_true", help=argparse.SUPPRESS)
    t.set_defaults(func=cmd_theory)
    return p


def main(argv=None) -> int:
    from .datagen.slicing import SlicingError
    from .datagen.workspace import WorkspaceError
    from .engine import ConfigError
    from .policies import InvalidPolicy, PolicyError
    from .proposers import ProposerUnavailable
    from .theory import HarnessError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"invevolve: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("invevolve: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (UsageError, ConfigError, WorkspaceError, InvalidPolicy, PolicyError, SlicingError, HarnessError,
            ProposerUnavailable, json.JSONDecodeError) as exc:
        print(f"invevolve: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"invevolve: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invevolve: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
