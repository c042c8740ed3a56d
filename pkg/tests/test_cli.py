import os
import subprocess
import sys

import pytest
import yaml

from heliotrack.cli import atomic_write, main
from heliotrack.config import config_from_dict
from heliotrack.sim import CSV_HEADER

from conftest import CONFIGS


@pytest.fixture
def short_config(tmp_path):
    p = tmp_path / "short.yaml"
    p.write_text("duration: 0.2\nscenario: {kind: step, amplitude: [1.0, 1.0]}\n")
    return p


def test_validate_defaults(tmp_path, capsys):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    assert main(["validate-config", "--config", str(p)]) == 0
    assert config_from_dict(yaml.safe_load(capsys.readouterr().out)) == config_from_dict({})


def test_validate_echo_round_trips(capsys):
    assert main(["validate-config", "--config", str(CONFIGS / "step.yaml")]) == 0
    echoed = yaml.safe_load(capsys.readouterr().out)
    from heliotrack.config import load_config
    assert config_from_dict(echoed) == load_config(CONFIGS / "step.yaml")


@pytest.mark.parametrize("body, fragment", [("controller: {mu: -1}\n", "mu must be > 0"),
                                            ("dt: 0\n", "dt")])
def test_invalid_config_exit_code(tmp_path, capsys, body, fragment):
    p = tmp_path / "bad.yaml"
    p.write_text(body)
    assert main(["validate-config", "--config", str(p)]) == 1
    assert fragment in capsys.readouterr().err


def test_missing_config_is_a_config_error(tmp_path):
    assert main(["validate-config", "--config", str(tmp_path / "nope.yaml")]) == 1


def test_simulate_writes_csv_and_metrics(tmp_path, short_config, capsys):
    out, met = tmp_path / "log.csv", tmp_path / "m.txt"
    rc = main(["simulate", "--config", str(short_config), "--out", str(out),
               "--metrics", str(met)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 2 * 2001
    assert "azimuth.settling_time" in met.read_text()
    assert capsys.readouterr().out == met.read_text()
    assert sorted(os.listdir(tmp_path)) == ["log.csv", "m.txt", "short.yaml"]


def test_quiet_prints_nothing(short_config, capsys):
    assert main(["simulate", "--quiet", "--config", str(short_config)]) == 0
    assert capsys.readouterr().out == ""


def test_unwritable_output_is_io_error(tmp_path, short_config):
    target = tmp_path / "missing_dir" / "log.csv"
    assert main(["simulate", "--config", str(short_config), "--out", str(target)]) == 3


def test_diverging_run_is_runtime_error(tmp_path):
    p = tmp_path / "wild.yaml"
    p.write_text("motor: {J: 1.0e-12}\ncontroller: {U0: 1.0e6}\nduration: 0.5\n")
    assert main(["simulate", "--quiet", "--config", str(p)]) == 2


def test_atomic_write_leaves_target_untouched_on_failure(tmp_path):
    target = tmp_path / "keep.txt"
    target.write_text("old")
    with pytest.raises(RuntimeError):
        with atomic_write(target) as fh:
            fh.write("new")
            raise RuntimeError("boom")
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["keep.txt"]


def test_sweep_table(tmp_path, short_config):
    grid = tmp_path / "grid.yaml"
    grid.write_text("controller.U0: [12.0, 24.0]\n")
    out = tmp_path / "res"
    assert main(["sweep", "--quiet", "--config", str(short_config), "--grid", str(grid),
                 "--out", str(out), "--workers", "1"]) == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("index,controller.U0,azimuth.settling_time")
    assert [r.split(",")[1] for r in rows[1:]] == ["12.0", "24.0"]


def test_sweep_with_unknown_field_is_config_error(tmp_path, short_config):
    grid = tmp_path / "grid.yaml"
    grid.write_text("controller.nope: [1]\n")
    assert main(["sweep", "--config", str(short_config), "--grid", str(grid),
                 "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def _solar(capsys, *args):
    assert main(["solar", *args]) == 0
    return dict(line.split(" = ") for line in capsys.readouterr().out.splitlines())


def test_solar_overhead_at_equator_on_equinox(capsys):
    # 12:07 local clock is apparent noon at longitude 0 that day (equation of time)
    pos = _solar(capsys, "--site", "0,0,0", "--date", "2024-03-20", "--time", "12:07")
    assert float(pos["elevation_deg"]) == pytest.approx(90.0, abs=0.5)
    clock = _solar(capsys, "--site", "0,0,0", "--date", "2024-03-20", "--time", "12:00")
    assert float(clock["elevation_deg"]) > 87.5


def test_solar_day_table_and_profile(tmp_path, capsys):
    prof = tmp_path / "ref.csv"
    assert main(["solar", "--step", "3600", "--out", str(prof), "--sample-dt", "60"]) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0] == "local_time_s,azimuth_deg,elevation_deg" and len(table) == 25
    assert prof.read_text().splitlines()[0] == "t,theta_r_az,theta_r_alt,omega_r_az,omega_r_alt"


def test_solar_polar_day_is_runtime_error(tmp_path):
    assert main(["solar", "--quiet", "--site", "80,0,0", "--out", str(tmp_path / "r.csv")]) == 2


def test_bad_site_and_time(capsys):
    assert main(["solar", "--site", "1,2"]) == 2
    assert main(["solar", "--time", "noonish"]) == 1


def test_energy_table(capsys):
    assert main(["energy", "--site", "0,0,0", "--date", "2024-03-20",
                 "--strategy", "horizontal", "--strategy", "tracked", "--dt", "10"]) == 0
    rows = [r.split(",") for r in capsys.readouterr().out.splitlines()]
    assert rows[0] == ["strategy", "full_sun_hours", "ratio_to_horizontal"]
    assert float(rows[2][2]) == pytest.approx(1.5708, rel=0.005)


def test_log_level_env(monkeypatch):
    from heliotrack.cli import _log_level
    monkeypatch.setenv("HELIOTRACK_LOG", "debug")
    assert _log_level() == 10
    monkeypatch.setenv("HELIOTRACK_LOG", "chatty")
    assert _log_level() == 30


def test_console_entry_point(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    r = subprocess.run([sys.executable, "-m", "heliotrack.cli", "validate-config", "--quiet",
                        "--config", str(p)], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout == ""
