"""Experiment configuration: a flat key = value text format.

Every field has a default; an empty file is a valid configuration.  Unknown
keys, malformed values, and missing files produce distinct diagnostics.  A
full echo of the effective configuration is written next to experiment
outputs, and ``parse_config(write_config(cfg))`` reproduces ``cfg`` exactly.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace

from .scenarios import ScenarioConfig


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Harness settings plus every scenario constant (flattened)."""

    # experiment shape
    scenario: str = "tag"
    brain: str = "shared"
    gathering: tuple = ("active", "active")  # per mode group, see run_matrix
    t_past: int = 6
    t_future: int = 6
    k_all: int = 1000
    k_batch: int = 10
    gamma: float = 0.1
    n_eq: tuple = (1,)
    max_iters: int = 100
    first_step_iters: int = 0      # 0: same as max_iters
    eps_tol: float = 1e-3
    lr: float = 1e-3
    hidden: tuple = (64, 64)
    episode_steps: int = 20
    trials: int = 10
    seed: int = 0
    outdir: str = "out"
    warehouse_random_tasks: bool = True
    dump_particles: bool = False
    resample_ess_fraction: float = 0.0  # 0 disables the resampling extension

    # scenario constants (mirroring ScenarioConfig)
    play_radius: float = 5.0
    boundary_weight: float = 10.0
    fov: float = math.pi / 2
    sigma2_base: float = 0.01
    c_scale: float = 5.0
    v_max_pursuer: float = 0.3
    v_max_evader: float = 0.375
    accel_ratio: float = 2.0
    init_pos_std: float = 2.0
    spawn_mode: bool = False
    spawn_east: tuple = (2.5, 0.0)
    spawn_west: tuple = (-2.5, 0.0)
    evader_start: tuple = (0.0, 0.0)
    chain_players: int = 4
    obstacles: tuple = ((1.8, 1.2, 0.7), (-1.8, -1.2, 0.7))
    wh_alpha: float = 4.0
    wh_beta: float = 20.0
    wh_eta1: float = 4.0
    wh_eta2: float = 4.0
    wh_station: tuple = (0.5, 1.0)
    wh_tasks: tuple = ((0.25, 0.25), (0.75, 0.6))
    wh_v_max_p1: float = 0.1
    wh_v_max_p2: float = 0.15

    def scenario_config(self, tasks=None):
        kwargs = {f.name: getattr(self, f.name) for f in fields(ScenarioConfig)
                  if f.name != "name"}
        if tasks is not None:
            kwargs["wh_tasks"] = tasks
        return ScenarioConfig(name=self.scenario, **kwargs)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_DEFAULTS = ExperimentConfig()


def _parse_scalar(text):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(key, text, default):
    text = text.strip()
    kind = type(default)
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is str:
            return text
        if kind is tuple:
            if ";" in text:
                return tuple(tuple(_parse_scalar(v) for v in group.split(","))
                             for group in text.split(";") if group.strip())
            if text == "":
                return ()
            return tuple(_parse_scalar(v) for v in text.split(","))
    except ValueError:
        pass
    raise ConfigError(f"malformed value for key '{key}': {text!r}")


def parse_config_text(text, source="<config>"):
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown configuration key '{key}'")
        cfg = replace(cfg, **{key: _parse_value(key, value, getattr(_DEFAULTS, key))})
    return cfg


def parse_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"configuration file not found: {path}")
    with open(path) as fh:
        return parse_config_text(fh.read(), source=str(path))


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(",".join(repr(x) if isinstance(x, float) else str(x)
                                      for x in group) for group in value)
        return ",".join(repr(x) if isinstance(x, float) else str(x) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_config(cfg, path):
    """Echo every field as key = value; the result parses back exactly."""
    with open(path, "w") as fh:
        for f in fields(ExperimentConfig):
            fh.write(f"{f.name} = {_format_value(getattr(cfg, f.name))}\n")
