#!/usr/bin/env python3
"""
Приемочный прогон: обучение с конфигурацией по умолчанию на встроенной сетке
и проверка порядка стоков и структуры матрицы переходов

Запуск: pytest -m slow test_acceptance.py
"""

import numpy as np
import pytest

from config import RunConfig
from evaluation import compare_all, run_greedy, wetland_conversion_share
from ppo_trainer import load_policy, train
from raster_io import load_inputs
from runoff import LulcClass, class_histogram
from scenarios import builtin_scenarios

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    cfg = RunConfig()
    cfg.output.directory = tmp_path_factory.mktemp("acceptance")
    grid, table = load_inputs(cfg)
    checkpoint_path, history = train(cfg, grid, table)
    actor, _, _ = load_policy(checkpoint_path, cfg.ppo.hidden_sizes)
    return cfg, grid, table, actor, history


def test_optimized_runoff_is_strict_minimum(trained):
    cfg, grid, table, actor, _ = trained
    report = compare_all(grid, builtin_scenarios(), actor, table, cfg.env)
    assert report.optimized_below_existing
    assert report.optimized_is_minimum


def test_greedy_sweep_converts_most_pixels_to_wetland(trained):
    cfg, grid, table, actor, _ = trained
    final_grid, matrix, _ = run_greedy(grid, actor, grid.pixel_count, cfg.env, table)
    assert wetland_conversion_share(grid, final_grid) >= 0.90

    np.testing.assert_array_equal(matrix.row_totals, class_histogram(grid).as_array())
    for frozen in (LulcClass.URBAN, LulcClass.WETLAND):
        row = matrix.counts[frozen]
        assert row[frozen] == row.sum()


def test_rewards_improve_over_training(trained):
    _, _, _, _, history = trained
    window = max(1, len(history) // 10)
    first = np.mean([s.mean_reward for s in history[:window]])
    last = np.mean([s.mean_reward for s in history[-window:]])
    assert last > first


def test_parameters_stay_finite(trained):
    _, _, _, actor, history = trained
    assert actor.params.all_finite()
    assert all(np.isfinite([s.policy_loss, s.value_loss, s.entropy]).all() for s in history)
