import json
import subprocess
import sys

import pytest

from fsmca.cli import main
from fsmca.plant import TrajectoryLog


@pytest.fixture
def drive_csv(tmp_path):
    p = tmp_path / "drive.csv"
    rows = ["t,ax,ay"] + [f"{i * 0.01:.2f},{0.5 if i > 10 else 0.0},0.0" for i in range(61)]
    p.write_text("\n".join(rows) + "\n")
    return p


def test_run_writes_log_and_summary(tmp_path, drive_csv, capsys):
    out = tmp_path / "traj.csv"
    code = main(["run", "--scenario", f"csv:{drive_csv}", "--algo", "fs", "--horizon", "10",
                 "--scale", "1.0", "--out", str(out)])
    assert code == 0
    assert "rmse" in capsys.readouterr().out
    assert len(TrajectoryLog.read_csv(out)["t"]) == 60


def test_recommend_scale(drive_csv, capsys):
    assert main(["recommend-scale", "--scenario", f"csv:{drive_csv}"]) == 0
    out = capsys.readouterr().out
    for key in ("k_theta=", "k_omega=", "k_final="):
        assert key in out


def test_compare_prints_delta(drive_csv, capsys):
    assert main(["compare", "--scenario", f"csv:{drive_csv}", "--horizon", "8", "--scale", "1"]) == 0
    out = capsys.readouterr().out
    assert "delta (fs - benchmark)" in out
    assert out.count("rmse") == 2


def test_sweep_with_config(tmp_path, drive_csv, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"w_fspec": 4.0, "omega_max": 3.0}))
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--scenario", f"csv:{drive_csv}", "--horizons", "6,8", "--scale", "1",
                 "--config", str(cfg), "--out", str(out)])
    assert code == 0
    assert len(out.read_text().splitlines()) == 5


@pytest.mark.parametrize("argv, needle", [
    (["run", "--scenario", "rally"], "unknown scenario"),
    (["run", "--scenario", "csv:/nonexistent/x.csv"], "not found"),
    (["run", "--scenario", "step", "--config", "/nonexistent/c.json"], "config file not found"),
])
def test_errors_exit_nonzero_with_message(argv, needle, capsys):
    assert main(argv) == 2
    assert needle in capsys.readouterr().err


def test_bad_config_contents(tmp_path, capsys):
    for text, needle in (("[1, 2]", "JSON object"), ("{bad", "invalid JSON"), ('{"w_fpsec": 1}', "unknown")):
        cfg = tmp_path / "c.json"
        cfg.write_text(text)
        assert main(["run", "--scenario", "step", "--config", str(cfg)]) == 2
        assert needle in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["run", "--scenario", "step", "--horizon", "0"],
    ["run", "--scenario", "step", "--dt", "-1"],
    ["run", "--scenario", "step", "--algo", "classic"],
    ["sweep", "--scenario", "step", "--horizons", ""],
    [],
])
def test_argument_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_module_entry_point(drive_csv):
    res = subprocess.run([sys.executable, "-m", "fsmca.cli", "recommend-scale", "--scenario", f"csv:{drive_csv}"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert "k_final=" in res.stdout
