import csv
import json

import pytest

from layerbatch.cli import main
from layerbatch.config import PROFILE_DIR_ENV
from layerbatch.data.reference_profiles import reference_profile_dict


@pytest.fixture
def profile_file(tmp_path):
    path = tmp_path / "server.json"
    path.write_text(json.dumps(reference_profile_dict(16)))
    return path


def test_oracle_check(capsys):
    assert main(["oracle-check", "--seed", "1", "--instances", "5", "--checks", "completion", "tardy"]) == 0
    out = capsys.readouterr().out
    assert "completion: 5 instances, 0 mismatches" in out
    assert "tardy: 5 instances, 0 mismatches" in out


def test_simulate_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = main(["simulate", "--scheduler", "batch", "--rate", "100", "--count", "50", "--seed", "2", "--out", str(out)])
    assert code == 0
    with out.open() as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 50
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["generated"] == 50
    assert summary["scheduler"] == "batch" and summary["seed"] == 2
    assert "=== batch" in capsys.readouterr().out


def test_simulate_with_clients(tmp_path):
    trace = tmp_path / "lte.csv"
    trace.write_text("timestamp_s,throughput_mbps\n0,10\n0.05,4\n10,4\n")
    out = tmp_path / "clients.csv"
    code = main(["simulate", "--clients", "3", "--offload", "partial", "--trace", str(trace),
                 "--trace-scale", "2", "--count", "40", "--rate", "50", "--out", str(out)])
    assert code == 0
    with out.open() as f:
        rows = list(csv.DictReader(f))
    assert all(float(r["deadline_s"]) == pytest.approx(float(r["arrival_s"]) + 0.3) for r in rows)


def test_sweep_capacity(tmp_path, profile_file):
    out = tmp_path / "sweep.csv"
    code = main(["sweep-capacity", "--profile", str(profile_file), "--scheduler", "no-batch", "batch",
                 "--rates", "5,400", "--count", "30", "--seeds", "2", "--out", str(out)])
    assert code == 0
    capacity = json.loads(out.with_suffix(".json").read_text())
    assert set(capacity) == {"no-batch", "batch"}
    with out.open() as f:
        assert len(list(csv.DictReader(f))) == 4


def test_sweep_reports_missing_capacity(profile_file, capsys):
    code = main(["sweep-capacity", "--profile", str(profile_file), "--scheduler", "no-batch",
                 "--rates", "400", "--count", "30"])
    assert code == 0
    assert "no-batch: capacity none" in capsys.readouterr().out


def test_input_errors_exit_2(tmp_path, capsys):
    assert main(["simulate", "--workload", str(tmp_path / "missing.toml")]) == 2
    assert main(["simulate", "--profile", str(tmp_path / "missing.json")]) == 2
    assert main(["sweep-capacity", "--rates", "20:10:1"]) == 2
    assert "error:" in capsys.readouterr().err


def test_validate_profile(profile_file, monkeypatch, capsys):
    assert main(["validate-profile", str(profile_file)]) == 0
    out = capsys.readouterr().out
    assert "max_batch: 16" in out
    assert "shared components: flownet2, vgg16_base" in out
    assert "sub-additivity violations:" in out
    monkeypatch.setenv(PROFILE_DIR_ENV, str(profile_file.parent))
    monkeypatch.chdir(profile_file.parent.parent)
    assert main(["validate-profile", profile_file.name]) == 0


def test_bad_profile_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate-profile", str(bad)]) == 2


def test_unknown_scheduler_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--scheduler", "fifo"])
    assert exc.value.code == 2
