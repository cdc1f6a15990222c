import datetime as dt
import hashlib
import json
from pathlib import Path

import pytest

from invevolve.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, EXIT_VIOLATION, main
from invevolve.datagen.workspace import load_workspace


def digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["gen", "--seeds", "1", "--slices", "2", "--budget", "5", "--out", str(out)]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def sawtooth(tmp_path_factory):
    """Workspace whose demand alternates 0/20, where a window quantile rule overstocks badly."""
    root = tmp_path_factory.mktemp("saw")
    d0 = dt.date(2024, 1, 1)
    rows = "".join(f"{(d0 + dt.timedelta(days=i)).isoformat()},{20 * (i % 2)}\n" for i in range(200))
    (root / "saw.csv").write_text("date,demand\n" + rows)
    assert main(["gen", "--csv", str(root / "saw.csv"), "--slices", "1", "--budget", "1",
                 "--out", str(root / "ws")]) == EXIT_OK
    (ws,) = [p for p in (root / "ws").iterdir() if p.is_dir()]
    fixture = root / "plant.json"
    fixture.write_text(json.dumps([{"family": "BaseStock", "params": {"S": 70}}]))
    return ws, fixture


def test_gen_layout_and_determinism(corpus, tmp_path):
    names = json.loads((corpus / "index.json").read_text())["workspaces"]
    assert len(names) == 2
    assert main(["gen", "--seeds", "1", "--slices", "2", "--budget", "5", "--out", str(tmp_path)]) == EXIT_OK
    assert digest(tmp_path) == digest(corpus)


def test_gen_single_slice(tmp_path):
    assert main(["gen", "--seeds", "1", "--slices", "1", "--budget", "2", "--out", str(tmp_path)]) == EXIT_OK
    assert len(json.loads((tmp_path / "index.json").read_text())["workspaces"]) == 1


def test_validation_exit_codes(corpus, tmp_path, capsys):
    ws = corpus / json.loads((corpus / "index.json").read_text())["workspaces"][0]
    assert main(["epoch", str(ws), "--J", "0", "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["epoch", str(ws), "--xi", "-1", "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["epoch", str(ws), "--proposer", "scripted", "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["nonsense"]) == EXIT_VALIDATION
    assert main(["gen", "--jobs", "0"]) == EXIT_VALIDATION
    assert main(["gen", "--seeds", "x"]) == EXIT_VALIDATION
    assert "error" in capsys.readouterr().err


def test_missing_workspace_is_io_error(tmp_path):
    assert main(["epoch", str(tmp_path / "nope"), "--out", str(tmp_path)]) == EXIT_IO


def test_plant_the_winner_epoch(sawtooth, tmp_path):
    ws, fixture = sawtooth
    rc = main(["epoch", str(ws), "--proposer", "scripted", "--fixture", str(fixture), "--budget", "1",
               "--J", "3", "--xi", "0", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    log = json.loads((tmp_path / "epoch_log.json").read_text())
    first = log["decisions"][0]
    assert first["round"] == 1 and first["promoted"] and first["safety_pass"] and first["improvement_pass"]
    planted = {"family": "BaseStock", "params": {"S": 70.0}}
    assert log["deployment_path"] == "feasible"
    assert json.loads((tmp_path / "deployed_policy.json").read_text()) == planted
    assert log["champion_path"][-1] == {"round": 1, "policy": planted}
    assert log["deployed"] == planted and log["deployed"] != log["reference"]


def test_epoch_auto_xi_cold_start_warns(sawtooth, tmp_path, caplog):
    ws, fixture = sawtooth
    with caplog.at_level("WARNING"):
        rc = main(["epoch", str(ws), "--proposer", "scripted", "--fixture", str(fixture), "--budget", "1",
                   "--J", "2", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    assert any("calibration" in r.getMessage() for r in caplog.records)
    log = json.loads((tmp_path / "epoch_log.json").read_text())
    assert log["config"]["xi"] == 0.0 and log["xi_budget"]["cold_start"]


def test_epoch_mutation_default_run(corpus, tmp_path):
    ws = corpus / json.loads((corpus / "index.json").read_text())["workspaces"][1]
    assert main(["epoch", str(ws), "--budget", "5", "--J", "10", "--out", str(tmp_path)]) == EXIT_OK
    log = json.loads((tmp_path / "epoch_log.json").read_text())
    assert len(log["decisions"]) == 10 and [d["round"] for d in log["decisions"]] == list(range(1, 11))
    assert log["evaluations_used"] <= log["budget"]
    assert log["deployment_path"] in ("feasible", "fallback_reference", "fallback_best")


def test_eval_self_comparison(corpus, tmp_path):
    ws_dir = corpus / json.loads((corpus / "index.json").read_text())["workspaces"][0]
    ws = load_workspace(ws_dir)
    best = min(ws.baselines, key=lambda b: b.family)
    pol = tmp_path / "p.json"
    pol.write_text(json.dumps(best.to_json()))
    assert main(["eval", str(ws_dir), str(pol), "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "eval_report.json").read_text())
    assert rep["evaluation_days"] == 30
    if rep["best_baseline"] == best.family:
        assert rep["relative_change_pct"] == 0 and rep["success"] is False
    assert rep["policy_cost"] == rep["baseline_costs"][best.family]


def test_eval_rejects_invalid_policy(corpus, tmp_path):
    ws_dir = corpus / json.loads((corpus / "index.json").read_text())["workspaces"][0]
    pol = tmp_path / "p.json"
    pol.write_text(json.dumps({"family": "BaseStock", "params": {"S": -3}}))
    assert main(["eval", str(ws_dir), str(pol), "--out", str(tmp_path)]) == EXIT_VALIDATION
    pol.write_text("{not json")
    assert main(["eval", str(ws_dir), str(pol), "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_theory_small_and_injected_bug(tmp_path):
    assert main(["theory", "--trials", "5", "--suite", "promotion", "--out", str(tmp_path)]) in (EXIT_OK,
                                                                                                  EXIT_VIOLATION)
    assert main(["theory", "--trials", "3", "--suite", "ratio", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "guarantee_reports.json").read_text())
    assert doc and all(r["holds"] for r in doc)
    assert (tmp_path / "guarantee_reports.md").read_text().startswith("|")
    assert main(["theory", "--trials", "200", "--suite", "rolling", "--inject-gate-bug",
                 "--out", str(tmp_path)]) == EXIT_VIOLATION


def test_bench_cli_small(tmp_path, monkeypatch, capsys):
    import invevolve.bench as bench

    real = bench.scenarios
    monkeypatch.setattr(bench, "scenarios", lambda *a, **k: real(*a, **k)[:2])
    assert main(["cbs-bench", "--baselines-only", "--horizon", "200", "--budget", "4",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert "CBS lowest among baselines in" in capsys.readouterr().out
    assert (tmp_path / "baseline_dominance.csv").is_file()
