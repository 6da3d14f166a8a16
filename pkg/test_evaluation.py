#!/usr/bin/env python3
"""
Тест оценки политики: жадный проход, матрица переходов, сравнение стока и отчеты
"""

import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

from config import EnvConfig
from environment import N_ACTIONS, OBSERVATION_SIZE
from evaluation import (
    ComparisonReport,
    TransitionMatrix,
    compare_all,
    emit_reports,
    run_greedy,
    wetland_conversion_share,
)
from neural import Actor, MlpParams
from rng import XorShift64Star
from runoff import CLASS_NAMES, LulcClass, class_histogram, compute_runoff
from scenarios import builtin_scenarios, identity_scenario

FLOW_PER_UNIT_C = 10 * 900_000 / 3.6e6


def wetland_actor() -> Actor:
    """Политика, всегда предпочитающая wetland (линейная сеть с большим смещением)"""
    weights = [np.zeros((OBSERVATION_SIZE, N_ACTIONS))]
    biases = [np.zeros(N_ACTIONS)]
    biases[0][LulcClass.WETLAND] = 10.0
    return Actor(MlpParams(weights, biases))


def random_actor(seed: int = 1) -> Actor:
    return Actor.create([OBSERVATION_SIZE, 8, N_ACTIONS], XorShift64Star(seed))


def test_zero_steps_gives_identity_matrix(seed_grid, default_table):
    final_grid, matrix, runoff = run_greedy(seed_grid, random_actor(), 0, EnvConfig(), default_table)
    hist = class_histogram(seed_grid).as_array()
    np.testing.assert_array_equal(matrix.counts, np.diag(hist))
    np.testing.assert_array_equal(final_grid.cells, seed_grid.cells)
    assert runoff.total_m3_per_s == compute_runoff(seed_grid, default_table).total_m3_per_s


def test_converged_policy_matrix_closed_form(seed_grid, default_table):
    final_grid, matrix, runoff = run_greedy(seed_grid, wetland_actor(), 1000, EnvConfig(), default_table)
    hist = class_histogram(seed_grid).as_array()

    expected = np.zeros((7, 7), dtype=np.int64)
    expected[LulcClass.URBAN, LulcClass.URBAN] = hist[LulcClass.URBAN]
    expected[LulcClass.WETLAND, LulcClass.WETLAND] = hist[LulcClass.WETLAND]
    for lulc_class in (LulcClass.WATER, LulcClass.BARREN, LulcClass.FOREST,
                       LulcClass.GRASSLAND, LulcClass.AGRICULTURE):
        expected[lulc_class, LulcClass.WETLAND] = hist[lulc_class]
    np.testing.assert_array_equal(matrix.counts, expected)

    np.testing.assert_array_equal(matrix.row_totals, hist)
    assert matrix.total == 1000
    assert runoff.total_m3_per_s == pytest.approx(0.1244 * FLOW_PER_UNIT_C, rel=1e-12)
    assert wetland_conversion_share(seed_grid, final_grid) == 1.0


def test_row_sums_for_any_policy(seed_grid, default_table):
    for seed, steps in ((1, 10), (2, 500), (3, 1000)):
        rng = XorShift64Star(seed)
        _, matrix, _ = run_greedy(seed_grid, random_actor(seed), steps, EnvConfig(), default_table, rng)
        np.testing.assert_array_equal(matrix.row_totals, class_histogram(seed_grid).as_array())
        for frozen in (LulcClass.URBAN, LulcClass.WETLAND):
            row = matrix.counts[frozen]
            assert row[frozen] == row.sum()


def test_compare_all_with_converged_policy(seed_grid, default_table):
    report = compare_all(seed_grid, builtin_scenarios(), wetland_actor(), default_table, EnvConfig())
    labels = [label for label, _ in report.entries]
    assert labels == ["existing", "s1", "s2", "s3", "s4", "s5", "optimized"]
    assert report.existing == pytest.approx(0.4199 * FLOW_PER_UNIT_C, rel=1e-12)
    assert report.optimized == pytest.approx(0.1244 * FLOW_PER_UNIT_C, rel=1e-12)
    assert report.optimized_below_existing
    assert report.optimized_is_minimum
    assert all(value >= 0 for _, value in report.entries)


def test_compare_all_is_permutation_stable(seed_grid, default_table):
    actor = random_actor(4)
    forward_order = compare_all(seed_grid, builtin_scenarios(), actor, default_table, EnvConfig())
    reverse_order = compare_all(seed_grid, builtin_scenarios()[::-1], actor, default_table, EnvConfig())
    assert forward_order.entries == reverse_order.entries


def test_identity_scenario_entry_equals_existing(seed_grid, default_table):
    report = compare_all(seed_grid, [identity_scenario()], random_actor(), default_table, EnvConfig())
    assert report.value("identity") == report.existing


def test_optimized_not_minimum_flag():
    report = ComparisonReport([("existing", 1.0), ("s1", 0.5), ("optimized", 0.7)])
    assert report.optimized_below_existing
    assert not report.optimized_is_minimum
    assert report.scenario_values == {"s1": 0.5}


def test_emit_reports(seed_grid, default_table, tmp_path):
    report = compare_all(seed_grid, builtin_scenarios(), wetland_actor(), default_table, EnvConfig())
    final_grid, matrix, _ = run_greedy(seed_grid, wetland_actor(), 1000, EnvConfig(), default_table)
    paths = emit_reports(report, matrix, tmp_path, final_grid)
    assert {path.name for path in paths} == {
        "comparison.csv", "transition.csv", "transition_share.csv", "comparison.svg", "final_grid.csv",
    }

    transition = (tmp_path / "transition.csv").read_text(encoding="utf-8").splitlines()
    assert len(transition) == 8
    assert transition[0] == "from," + ",".join(CLASS_NAMES) + ",total"

    comparison = pd.read_csv(tmp_path / "comparison.csv")
    assert list(comparison.columns) == ["label", "runoff_m3_per_s"]
    assert len(comparison) == 7

    shares = pd.read_csv(tmp_path / "transition_share.csv")
    row_sums = shares[list(CLASS_NAMES)].sum(axis=1)
    np.testing.assert_allclose(row_sums, 1.0)

    root = ET.parse(tmp_path / "comparison.svg").getroot()
    bars = [element for element in root.iter() if element.get("id", "").startswith("bar-")]
    assert len(bars) == 7
    assert not any(element.tag.endswith("script") for element in root.iter())


def test_svg_is_reproducible(seed_grid, default_table, tmp_path):
    report = ComparisonReport([("existing", 1.0), ("s1", 0.9), ("optimized", 0.3)])
    matrix = TransitionMatrix.from_cells(seed_grid.cells, seed_grid.cells)
    emit_reports(report, matrix, tmp_path / "a")
    emit_reports(report, matrix, tmp_path / "b")
    assert (tmp_path / "a" / "comparison.svg").read_bytes() == (tmp_path / "b" / "comparison.svg").read_bytes()
