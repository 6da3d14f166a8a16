#!/usr/bin/env python3
"""
Тест конфигурации запуска
"""

import pytest
import yaml

from config import RunConfig, apply_overrides, load_run_config
from errors import ConfigError


def test_defaults():
    cfg = load_run_config(None)
    assert cfg.ppo.gamma == 0.99
    assert cfg.ppo.gae_lambda == 0.95
    assert cfg.ppo.clip_epsilon == 0.2
    assert cfg.ppo.epochs_per_update == 4
    assert cfg.ppo.minibatch_size == 256
    assert cfg.ppo.rollout_horizon == 2048
    assert cfg.ppo.value_coef == 0.5
    assert cfg.ppo.entropy_coef == 0.01
    assert cfg.ppo.learning_rate == 3e-4
    assert cfg.env.reward_scale == 1e3
    assert cfg.env.target_bonus == 0.0
    assert cfg.env.frozen_classes == ["urban", "wetland"]
    assert cfg.runoff.rainfall_intensity_mm_hr == 10.0


def test_relative_paths_resolve_against_config_dir(tmp_path):
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "grid.csv").write_text("1,1,900\n0\n", encoding="utf-8")
    path = tmp_path / "run.yaml"
    path.write_text("seed: 42\ngrid:\n  path: data/grid.csv\nppo:\n  total_updates: 3\n", encoding="utf-8")
    cfg = load_run_config(path)
    assert cfg.seed == 42
    assert cfg.grid.path == tmp_path / "data" / "grid.csv"
    assert cfg.ppo.total_updates == 3


@pytest.mark.parametrize("text", [
    "ppo:\n  clip_epsilon: 1.5\n",
    "ppo:\n  unknown_knob: 1\n",
    "seed: -1\n",
    "env:\n  frozen_classes: [tundra]\n",
    "env:\n  target_mode: stop\n",
    "runoff:\n  coefficients: {water: 1.2}\n",
    "- just\n- a list\n",
    "ppo: [unclosed\n",
])
def test_invalid_configs(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_missing_referenced_file_is_named(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("grid:\n  path: missing.csv\n", encoding="utf-8")
    with pytest.raises(ConfigError) as exc_info:
        load_run_config(path)
    assert "missing.csv" in str(exc_info.value)


def test_overrides():
    cfg = apply_overrides(RunConfig(), seed=9, out="elsewhere", workers=2, updates=0)
    assert (cfg.seed, cfg.ppo.workers, cfg.ppo.total_updates) == (9, 2, 0)
    assert str(cfg.output.directory) == "elsewhere"
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), workers=0)


def test_yaml_snapshot_round_trip():
    cfg = RunConfig()
    restored = RunConfig.model_validate(yaml.safe_load(cfg.to_yaml()))
    assert restored.snapshot() == cfg.snapshot()
