"""Command-line interface: validation, runs, artifacts, determinism, exit codes."""

import json

from gridrestore.cases import bundled_case_path
from gridrestore.cli import EXIT_OK, EXIT_VALIDATION, main


def test_validate_bundled_case(capsys):
    assert main(["validate", "--scenario", str(bundled_case_path())]) == EXIT_OK
    assert "0 violations" in capsys.readouterr().out


def test_validate_names_uncoupled_facility(tmp_path, capsys):
    raw = json.loads(bundled_case_path().read_text())
    del raw["couplings"]["cn_nodes"]["c09"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    assert main(["validate", "--scenario", str(bad)]) == EXIT_VALIDATION
    out = capsys.readouterr().out
    assert "c09" in out


def test_validate_reports_parse_location(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1,\n "params": {"eta": 0..3}}\n')
    assert main(["validate", "--scenario", str(bad)]) == EXIT_VALIDATION
    assert "line 2" in capsys.readouterr().out


def test_case_command_roundtrips(tmp_path):
    out = tmp_path / "case.json"
    assert main(["case", "--out", str(out)]) == EXIT_OK
    assert out.read_text() == bundled_case_path().read_text()


def test_run_writes_artifacts_and_is_deterministic(tmp_path):
    args = [
        "run", "--scenario", str(bundled_case_path()), "--strategy", "A3",
        "--seed", "5", "--horizon", "900", "--out",
    ]
    assert main(args + [str(tmp_path / "one")]) == EXIT_OK
    assert main(args + [str(tmp_path / "two")]) == EXIT_OK
    for name in ("events_A3.json", "curve_A3.csv", "traces_A3.json",
                 "dispatch_A3.json", "summary.json"):
        a = (tmp_path / "one" / name).read_bytes()
        b = (tmp_path / "two" / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"

    curve = (tmp_path / "one" / "curve_A3.csv").read_text().splitlines()
    assert len(curve) == 901
    assert curve[0] == "0,0.000"


def test_run_horizon_one_truncates(tmp_path):
    out = tmp_path / "short"
    assert main([
        "run", "--scenario", str(bundled_case_path()), "--strategy", "A1",
        "--horizon", "1", "--out", str(out),
    ]) == EXIT_OK
    curve = (out / "curve_A1.csv").read_text().splitlines()
    assert len(curve) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["A1"]["final_restored_kw"] == 0.0
    events = json.loads((out / "events_A1.json").read_text())
    assert any(e["kind"] == "step-unexecuted" for e in events)


def test_env_seed_override(tmp_path, monkeypatch):
    base = [
        "run", "--scenario", str(bundled_case_path()), "--strategy", "A1",
        "--seed", "5", "--horizon", "60", "--out",
    ]
    assert main(base + [str(tmp_path / "a")]) == EXIT_OK
    monkeypatch.setenv("GRIDRESTORE_SEED", "18")
    assert main(base + [str(tmp_path / "b")]) == EXIT_OK
    a = json.loads((tmp_path / "a" / "summary.json").read_text())
    b = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert a["A1"]["seed"] == 5
    assert b["A1"]["seed"] == 18  # environment beats the flag for CI pinning


def test_oracle_command_small_counts(capsys):
    assert main(["oracle", "--suite", "dispatch", "--count", "40", "--seed", "3"]) == EXIT_OK
    assert "40/40" in capsys.readouterr().out
    assert main(["oracle", "--suite", "radiality", "--count", "50", "--seed", "3"]) == EXIT_OK
