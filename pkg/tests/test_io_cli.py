import json

import numpy as np
import pytest

from qjump import ConfigError, ICKind, ModelParams, TruncationOverflowError
from qjump import cli
from qjump.cli import main, parse_overrides, run_scenario
from qjump.io import (ScenarioConfig, format_value, load_config, parse_config_text, read_output,
                      render_csv, render_json, write_output)


def write(tmp_path, text, name="cfg.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def data_section(path):
    return path.read_text().split("\n", 1)[1]


# ---- config ------------------------------------------------------------

def test_parse_config_text():
    raw = parse_config_text("# comment\nscenario = reduced  # trailing\n\nomega0=2\nt-end = 3\n")
    assert raw == {"scenario": "reduced", "omega0": "2", "t_end": "3"}


@pytest.mark.parametrize("text", ["scenario reduced", "scenario = reduced\nbogus = 1"])
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_load_config_defaults_and_conversion():
    cfg = load_config({"scenario": "ensemble", "d1": "8", "ic": "EqualMixture",
                       "master_seed": "0x10", "ratios": "4, 8"})
    assert cfg.params == ModelParams(omega0=1.0, epsilon=0.0, d1=8.0)
    assert cfg.ic.kind is ICKind.EQUAL_MIXTURE
    assert cfg.master_seed == 16 and cfg.ratios == (4.0, 8.0)
    assert cfg.output_path == "ensemble.csv"


def test_load_config_from_detector():
    cfg = load_config({"scenario": "reduced", "transmission_open": "0.5",
                       "bias": str(4 * np.pi)})
    assert cfg.params.d1 == pytest.approx(1.0)


@pytest.mark.parametrize("raw", [
    {"omega0": "1"},
    {"scenario": "nope"},
    {"scenario": "reduced", "d1": "1", "transmission_open": "1", "bias": "1"},
    {"scenario": "reduced", "bias": "1"},
    {"scenario": "reduced", "t_end": "-1"},
    {"scenario": "reduced", "t_end": "abc"},
    {"scenario": "reduced", "format": "xml"},
    {"scenario": "ensemble", "n_traj": "0"},
    {"scenario": "reduced", "master_seed": "-1"},
    {"scenario": "reduced", "ic": "Sideways"},
    {"scenario": "reduced", "ratios": "1,x"},
])
def test_load_config_errors(raw):
    with pytest.raises(ConfigError):
        load_config(raw)


def test_overrides():
    assert parse_overrides(["--t-end", "3", "--d1=4"]) == {"t_end": "3", "d1": "4"}
    with pytest.raises(ConfigError):
        parse_overrides(["t_end", "3"])
    with pytest.raises(ConfigError):
        parse_overrides(["--t_end"])


# ---- serialization -----------------------------------------------------

def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(np.int64(3)) == "3"
    assert format_value(True) == "1"


def test_csv_layout():
    text = render_csv({"a": 1, "rng": "x=y"}, ["t", "v"], [np.array([0.0, 0.5]), np.array([1, 2])])
    lines = text.splitlines()
    assert lines[0] == "# a=1 rng=x=y"
    assert lines[1] == "t,v"
    assert lines[2:] == ["0,1", "0.5,2"]
    with pytest.raises(ValueError):
        render_csv({"a": "has space"}, ["t"], [[0.0]])


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_round_trip(tmp_path, fmt):
    rng = np.random.default_rng(0)
    data = [rng.normal(size=7) * 10.0 ** rng.integers(-300, 300, size=7), np.arange(7)]
    path = tmp_path / f"out.{fmt}"
    write_output(path, fmt, {"k": 0.1, "name": "x"}, ["a", "b"], data)
    meta, columns, arrays = read_output(path)
    assert columns == ["a", "b"] and meta["name"] == "x"
    assert float(meta["k"]) == 0.1
    assert np.array_equal(arrays["a"], data[0]) and np.array_equal(arrays["b"], data[1])


def test_json_structure():
    doc = json.loads(render_json({"x": float("inf")}, ["t"], [[1.0]]))
    assert doc == {"metadata": {"x": "inf"}, "columns": ["t"], "data": [[1.0]]}


# ---- scenarios ---------------------------------------------------------

def test_reduced_scenario_columns():
    res = run_scenario(load_config({"scenario": "reduced", "d1": "16", "t_end": "2"}))
    assert res.meta["rng"] == "none" and res.meta["version"]
    assert res.data[0][0] == 0.0 and res.data[0][-1] == pytest.approx(2.0)


def test_n_resolved_scenario_probabilities_sum():
    res = run_scenario(load_config({"scenario": "n_resolved", "d1": "2", "t_end": "1",
                                    "sample_dt": "0.5"}))
    cols = dict(zip(res.columns, res.data))
    for t in np.unique(cols["t"]):
        assert cols["p"][cols["t"] == t].sum() == pytest.approx(1.0, abs=1e-9)


def test_trajectory_scenario_columns():
    res = run_scenario(load_config({"scenario": "trajectory", "d1": "16", "t_end": "4",
                                    "master_seed": "3"}))
    assert res.columns == ["t", "current", "sigma11_cond", "n_cum"]
    assert res.meta["rng"].startswith("numpy.Philox")


def test_ensemble_scenario():
    res = run_scenario(load_config({"scenario": "ensemble", "d1": "16", "t_end": "2",
                                    "n_traj": "50", "ic": "EqualMixture"}), workers=1)
    cols = dict(zip(res.columns, res.data))
    assert np.allclose(cols["nocollapse_current"], 8.0)
    assert np.allclose(cols["sigma11_master"], 0.5)
    assert np.all(np.abs(cols["mean_current"] - 8.0) < 5 * cols["sem_current"] + 1e-12)


def test_zeno_sweep_table():
    res = run_scenario(load_config({"scenario": "zeno_sweep", "omega0": "1"}))
    cols = dict(zip(res.columns, res.data))
    assert np.array_equal(cols["d1"], [8.0, 16.0, 32.0])
    assert np.all((cols["ratio"] >= 0.8) & (cols["ratio"] <= 1.2))
    assert res.summary[-1] == "zeno_sweep PASS"


def test_gaussian_check_line(tmp_path, capsys):
    cfg = write(tmp_path, f"scenario = gaussian_check\nd1 = 1\noutput_path = {tmp_path}/g.csv\n")
    assert main(["run", cfg]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("gaussian_check D1t=100 ") and line.endswith("PASS")
    assert float(line.split("tv_gaussian=")[1].split()[0]) < 0.03


def test_steady_check_scenario():
    res = run_scenario(load_config({"scenario": "steady_check"}))
    cols = dict(zip(res.columns, res.data))
    assert np.all(cols["deviation"] < 1e-3)


# ---- exit codes and determinism ---------------------------------------

def test_exit_codes(tmp_path, monkeypatch):
    out = tmp_path / "r.csv"
    good = write(tmp_path, f"scenario = reduced\nt_end = 1\noutput_path = {out}\n")
    assert main(["run", good]) == 0 and out.exists()
    assert main(["run", str(tmp_path / "missing.txt")]) == 2
    assert main(["run", write(tmp_path, "scenario = what\n", "bad.txt")]) == 2
    assert main(["run", good, "--output_path", str(tmp_path / "no" / "dir.csv")]) == 2
    assert main(["run", good, "--d1", "16", "--dt", "0.1"]) == 3

    def overflow(cfg, **kw):
        raise TruncationOverflowError("ladder exhausted")

    monkeypatch.setattr(cli, "run_scenario", overflow)
    assert main(["run", good]) == 4


def test_trajectory_determinism(tmp_path):
    paths = []
    for i in range(2):
        path = tmp_path / f"t{i}.csv"
        cfg = write(tmp_path, f"scenario = trajectory\nd1 = 16\nt_end = 4\nmaster_seed = 77\n"
                              f"output_path = {path}\n", f"c{i}.txt")
        assert main(["run", cfg]) == 0
        paths.append(path)
    assert data_section(paths[0]) == data_section(paths[1])
    other = tmp_path / "other.csv"
    assert main(["run", cfg, "--master_seed", "78", "--output_path", str(other)]) == 0
    assert data_section(other) != data_section(paths[0])


def test_json_output_reparses(tmp_path):
    path = tmp_path / "r.json"
    cfg = write(tmp_path, f"scenario = reduced\nt_end = 1\nformat = json\noutput_path = {path}\n")
    assert main(["run", cfg]) == 0
    meta, columns, arrays = read_output(path)
    assert meta["scenario"] == "reduced" and columns[0] == "t"


def test_stdout_output(capsys):
    cfg = ScenarioConfig("reduced", t_end=0.5, output_path="-")
    assert cli.run(cfg) == 0
    assert capsys.readouterr().out.startswith("# scenario=reduced ")
