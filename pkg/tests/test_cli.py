import csv

import numpy as np
import pytest

from pdcwigner import cli
from pdcwigner.config import SCHEMA, ConfigError, RunConfig, format_config, load_config, validate

FAST = ["--set", "run.realizations=3000"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_default_config_is_clean():
    assert validate(load_config()) == []


def test_strong_coupling_warns_with_ceiling():
    diags = validate(load_config(overrides=["crystal.g=0.5"]))
    assert [d.severity for d in diags] == ["warning"]
    assert "ceiling" in diags[0].message


def test_matching_violation_is_error():
    diags = validate(load_config(overrides=["grid.center_e=1.2"]))
    assert any(d.severity == "error" and "matching condition" in d.message for d in diags)


def test_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid.n_pairs = 4\ncrystal.gg = 0.1  # typo\n")
    with pytest.raises(ConfigError, match="crystal.gg"):
        load_config(cfg)


def test_bad_value_names_key():
    with pytest.raises(ConfigError, match="grid.n_pairs"):
        load_config(overrides=["grid.n_pairs=many"])


def test_file_comments_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\n\ngrid.n_pairs = 4   # trailing\ncrystal.pump_amplitude = 0.5+0.5j\n")
    values = load_config(cfg, ["grid.n_pairs=6", "crystal.kernel_sigma=0.02"])
    assert values["grid.n_pairs"] == 6
    assert values["crystal.pump_amplitude"] == 0.5 + 0.5j
    assert values["crystal.kernel_sigma"] == 0.02


def test_format_round_trip(tmp_path):
    values = load_config(overrides=["crystal.g=0.07", "detect.windows_corr_times=1,2.5"])
    path = tmp_path / "m.cfg"
    path.write_text(format_config(values))
    assert load_config(path) == values
    assert len(format_config(values).splitlines()) == len(SCHEMA)


def test_run_config_builders():
    cfg = RunConfig.load(overrides=["grid.n_pairs=3"])
    grid, params = cfg.grid(), cfg.crystal()
    assert grid.n_modes == 12
    d1, d2 = cfg.detectors(grid, params, window_corr_times=5)
    assert len(d1.probe.time_offsets) == 20 and d2.probe.beam == 2


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["validate"]) == cli.EXIT_OK
    assert cli.main(["validate", "--set", "grid.center_o=0.7"]) == cli.EXIT_VALIDATION
    assert cli.main(["correlate", "--set", "nope=1"]) == cli.EXIT_CONFIG
    assert cli.main(["correlate", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    assert cli.main(["scan", "--set", "grid.center_o=0.7", "--out", str(tmp_path)]) == cli.EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "nope" in err and "grid.center_e" in err


def test_runtime_failure_leaves_no_outputs(tmp_path, monkeypatch):
    def boom(cfg):
        raise RuntimeError("simulated failure")
    monkeypatch.setitem(cli.PIPELINES, "scan", boom)
    out = tmp_path / "o"
    assert cli.main(["scan", "--out", str(out)]) == cli.EXIT_RUNTIME
    assert not out.exists() or not any(out.iterdir())


def test_bell_default_writes_scan_and_report(tmp_path):
    out = tmp_path / "bell"
    assert cli.main(["bell", "--out", str(out)]) == cli.EXIT_OK
    assert len(_rows(out / "scan.csv")) == 36
    assert list(_rows(out / "scan.csv")[0]) == ["phi1", "phi2", "rate", "stderr", "fit", "residual"]
    report = dict(line.split(" = ", 1) for line in (out / "bell_report.txt").read_text().splitlines())
    assert float(report["chsh.gaussian.S"]) == pytest.approx(2 * np.sqrt(2))
    assert "ch.clipped.eta=1.0.violated_genuine" in report
    assert (out / "manifest.txt").exists()


def test_correlate_without_coupling_is_zero(tmp_path):
    out = tmp_path / "c"
    assert cli.main(["correlate", "--out", str(out), "--set", "crystal.g=0", *FAST]) == cli.EXIT_OK
    rows = _rows(out / "correlations.csv")
    assert len(rows) == 16
    for row in rows:
        assert float(row["re_analytic"]) == 0 and float(row["im_analytic"]) == 0
        assert abs(complex(float(row["re_mc"]), float(row["im_mc"]))) <= 3 * float(row["stderr"])


def test_detect_and_dump_grid(tmp_path):
    out = tmp_path / "d"
    assert cli.main(["detect", "--out", str(out), *FAST]) == cli.EXIT_OK
    rows = _rows(out / "rates.csv")
    assert len(rows) == 12
    assert all(float(r["clipped"]) >= float(r["standard"]) for r in rows)
    assert cli.main(["dump-grid", "--out", str(out)]) == cli.EXIT_OK
    assert len(_rows(out / "grid.csv")) == 64


@pytest.mark.parametrize("command", ["correlate", "detect", "scan"])
def test_rerun_is_byte_identical(tmp_path, command):
    a, b = tmp_path / "a", tmp_path / "b"
    args = [command, *FAST, "--set", "scan.engine=clipped", "--seed", "99"]
    assert cli.main([*args, "--out", str(a)]) == cli.EXIT_OK
    assert cli.main([*args, "--out", str(b)]) == cli.EXIT_OK
    for f in a.glob("*.csv"):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_manifest_reruns_result(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["correlate", *FAST, "--seed", "5", "--set", "correlate.points=4", "--out", str(a)]) == 0
    assert cli.main(["correlate", "--config", str(a / "manifest.txt"), "--out", str(b)]) == 0
    assert (a / "correlations.csv").read_bytes() == (b / "correlations.csv").read_bytes()
    assert "subcommand: correlate" in (a / "manifest.txt").read_text()


def test_worker_count_does_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["detect", *FAST, "--workers", "1", "--out", str(a)]) == 0
    assert cli.main(["detect", *FAST, "--workers", "3", "--out", str(b)]) == 0
    assert (a / "rates.csv").read_bytes() == (b / "rates.csv").read_bytes()
