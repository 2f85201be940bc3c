"""Tests for scenario configuration."""

from pathlib import Path

import pytest

from voasim.config import MonteCarloSpec, ScenarioConfig, SweepSpec, build_config, load_config, parse_grid
from voasim.models import DetectorCalibration, ParameterError, SystemParams

from .conftest import mk_config

# --- Grids ---


def test_parse_grid_is_inclusive():
    grid = parse_grid("40:160:2")
    assert len(grid) == 61
    assert grid[0] == 40.0
    assert grid[-1] == 160.0


def test_parse_grid_fractional_step():
    assert parse_grid("0:1:0.1") == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def test_parse_grid_single_point():
    assert parse_grid("5:5:1") == (5.0,)


@pytest.mark.parametrize("text", ["1:2", "a:b:c", "1:10:0", "10:1:1", "1:10:-1"])
def test_parse_grid_rejects_bad_text(text):
    with pytest.raises(ParameterError):
        parse_grid(text)


def test_sweep_spec_rejects_unsorted():
    with pytest.raises(ParameterError):
        SweepSpec("distance", (10.0, 5.0))


def test_sweep_spec_rejects_empty_and_unknown_axis():
    with pytest.raises(ParameterError):
        SweepSpec("distance", ())
    with pytest.raises(ParameterError):
        SweepSpec("wavelength", (1.0,))


# --- Building ---


def test_build_config_defaults():
    cfg = build_config({})
    assert cfg.sys == SystemParams()
    assert cfg.scen.k == 1.0
    assert cfg.eps_list == (0.01, 0.03, 0.05)
    assert cfg.calibration == DetectorCalibration()
    assert not cfg.has_channel


def test_missing_channel_is_bad_input():
    cfg = build_config({"k": 5})
    with pytest.raises(ParameterError, match="no channel"):
        _ = cfg.channel


def test_build_config_rejects_unknown_keys():
    with pytest.raises(ParameterError, match="colour"):
        build_config({"colour": "red"})


def test_build_config_validates_given_channel_eagerly():
    with pytest.raises(ParameterError):
        build_config({"t_trans": 1.5})


def test_build_config_rejects_two_channel_parameterizations():
    with pytest.raises(ParameterError):
        build_config({"t_trans": 0.5, "distance_km": 10})


def test_build_config_distance_channel():
    cfg = build_config({"distance_km": 50, "eps": 0.02})
    assert cfg.channel.t_trans == pytest.approx(0.1)
    assert cfg.channel.eps == 0.02


def test_build_config_fiber_loss():
    cfg = build_config({"distance_km": 25, "fiber_loss_db_per_km": 0.4})
    assert cfg.channel.t_trans == pytest.approx(0.1)


def test_build_config_integer_block_sizes_from_yaml_floats():
    cfg = build_config({"n_total": 1e8, "m_est": 5e7})
    assert cfg.sys.n_total == 10**8
    assert isinstance(cfg.sys.m_est, int)


def test_build_config_eps_bar_follows_eps_pe():
    cfg = build_config({"eps_pe": 1e-5})
    assert cfg.sys.eps_bar == 1e-5


def test_build_config_validates_system():
    with pytest.raises(ParameterError):
        build_config({"beta": 1.2})


def test_build_config_sweep_from_range():
    cfg = build_config({"sweep": {"axis": "distance", "start": 40, "stop": 60, "step": 10}})
    assert cfg.sweep == SweepSpec("distance", (40.0, 50.0, 60.0))


def test_build_config_sweep_from_values():
    cfg = build_config({"sweep": {"axis": "k", "values": [1, 2, 5]}})
    assert cfg.sweep == SweepSpec("k", (1.0, 2.0, 5.0))


def test_build_config_rejects_sweep_without_axis():
    with pytest.raises(ParameterError):
        build_config({"sweep": {"values": [1]}})


def test_build_config_calibration_mapping():
    cfg = build_config({"calibration": {"g": 2.0}})
    assert cfg.calibration.gain == pytest.approx(4.0)


def test_build_config_calibration_preset_name():
    cfg = build_config({"calibration": "telecom"})
    assert cfg.calibration.p_lo == 1e-3


def test_build_config_rejects_bad_calibration():
    with pytest.raises(ParameterError):
        build_config({"calibration": {"gain": 2.0}})
    with pytest.raises(ParameterError):
        build_config({"calibration": 3})


def test_build_config_montecarlo():
    cfg = build_config({"montecarlo": {"scenario": "coverage", "trials": 10, "count": 1000}})
    assert cfg.montecarlo == MonteCarloSpec("coverage", 10, 1000)


def test_build_config_rejects_bad_montecarlo():
    with pytest.raises(ParameterError):
        build_config({"montecarlo": {"scenario": "masking", "repeats": 3}})
    with pytest.raises(ParameterError):
        build_config({"montecarlo": {"scenario": "timing"}})
    with pytest.raises(ParameterError):
        build_config({"montecarlo": [1, 2]})


def test_build_config_requires_seed():
    with pytest.raises(ParameterError):
        build_config({"seeds": []})


def test_build_config_preset_is_base_layer():
    cfg = build_config({"preset": "telecom", "eta": 0.6})
    assert cfg.sys.eta == 0.6
    assert cfg.sys.n0 < 1e-3
    assert cfg.calibration.rho == 0.85


def test_build_config_unknown_preset():
    with pytest.raises(FileNotFoundError):
        build_config({"preset": "nonexistent_preset_xyz"})


def test_scenario_config_frozen():
    cfg = ScenarioConfig()
    with pytest.raises(AttributeError):
        cfg.eps = 0.5  # type: ignore


# --- Loading ---


def test_load_config_without_file():
    assert load_config() == build_config({})


def test_load_config_reads_yaml(tmp_path):
    path = mk_config(tmp_path, {"k": 5, "u": 0.2, "distance_km": 50, "seeds": [1, 2, 3]})
    cfg = load_config(path)
    assert cfg.scen.k == 5.0
    assert cfg.scen.u == 0.2
    assert cfg.seeds == (1, 2, 3)


def test_load_config_output_relative_to_file(tmp_path):
    path = mk_config(tmp_path, {"output": "out/fig7.csv"})
    assert load_config(path).output == tmp_path / "out" / "fig7.csv"


def test_load_config_absolute_output_kept(tmp_path):
    path = mk_config(tmp_path, {"output": "/data/fig7.csv"})
    assert load_config(path).output == Path("/data/fig7.csv")


def test_load_config_rejects_non_mapping(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ParameterError):
        load_config(path)


def test_load_config_rejects_invalid_yaml(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text("k: [1, 2\n")
    with pytest.raises(ParameterError, match="invalid YAML"):
        load_config(path)


def test_overrides_replace_channel_parameterization(tmp_path):
    path = mk_config(tmp_path, {"t_trans": 0.5})
    cfg = load_config(path, {"distance_km": 50, "eps": None})
    assert cfg.t_trans is None
    assert cfg.channel.t_trans == pytest.approx(0.1)


def test_overrides_skip_none(tmp_path):
    path = mk_config(tmp_path, {"k": 3})
    assert load_config(path, {"k": None}).scen.k == 3.0
