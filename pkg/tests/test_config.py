"""Configuration parsing: defaults, diagnostics, round trip."""

import math

import numpy as np
import pytest

from pogplan.config import (
    ConfigError,
    ExperimentConfig,
    parse_config,
    parse_config_text,
    write_config,
)


def test_empty_file_gives_experiment_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = parse_config(path)
    # headline defaults of the benchmark setup
    assert cfg.t_future == 6
    assert cfg.t_past == 6
    assert cfg.gamma == 0.1
    assert cfg.k_all == 1000
    assert cfg.k_batch == 10
    assert cfg.max_iters == 100
    assert cfg.episode_steps == 20
    assert cfg.hidden == (64, 64)


def test_simple_overrides_and_comments():
    cfg = parse_config_text("""
        # harness
        gamma = 0.25
        scenario = warehouse   # trailing comment
        trials = 3
        hidden = 16, 8
        gathering = passive, active
        spawn_mode = true
        obstacles = 1.0,0.5,0.3 ; -1.0,-0.5,0.4
    """)
    assert cfg.gamma == 0.25
    assert cfg.scenario == "warehouse"
    assert cfg.trials == 3
    assert cfg.hidden == (16, 8)
    assert cfg.gathering == ("passive", "active")
    assert cfg.spawn_mode is True
    assert cfg.obstacles == ((1.0, 0.5, 0.3), (-1.0, -0.5, 0.4))


def test_malformed_value_names_the_key():
    with pytest.raises(ConfigError, match="gamma"):
        parse_config_text("gamma = banana")
    with pytest.raises(ConfigError, match="trials"):
        parse_config_text("trials = 2.5")
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_text("just some words")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown configuration key 'flux'"):
        parse_config_text("flux = 1")


def test_missing_file_distinct_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.cfg")


def test_round_trip_exact(tmp_path):
    cfg = parse_config_text("""
        scenario = hideseek
        brain = separate
        gamma = 0.17
        n_eq = 2, 3
        hidden = 12, 7
        obstacles = 0.5,0.25,0.125 ; -2.0,1.0,0.5
        wh_station = 0.5, 1.0
        lr = 0.0035
        spawn_mode = true
        fov = 1.2345678901234567
    """)
    path = tmp_path / "echo.cfg"
    write_config(cfg, path)
    again = parse_config(path)
    assert again == cfg


def test_scenario_config_carries_constants():
    cfg = parse_config_text("scenario = warehouse\nwh_alpha = 7.5\nt_future = 4")
    sc = cfg.scenario_config()
    assert sc.name == "warehouse"
    assert sc.wh_alpha == 7.5
    assert sc.t_future == 4
    sc2 = cfg.scenario_config(tasks=((0.1, 0.1), (0.9, 0.9)))
    assert sc2.wh_tasks == ((0.1, 0.1), (0.9, 0.9))
