#!/usr/bin/env python3
"""
Тест ввода-вывода растров, таблиц коэффициентов и встроенной сетки
"""

import numpy as np
import pytest

from config import RunConfig
from errors import ConfigError
from raster_io import (
    grid_csv_text,
    load_coefficient_table,
    load_grid,
    make_seed_grid,
    read_coefficient_csv,
    read_grid_csv,
    write_grid_csv,
    write_mask_csv,
)
from runoff import LulcClass, class_histogram


def test_seed_grid_counts_and_frozen_mask():
    grid = make_seed_grid()
    assert (grid.width, grid.height) == (25, 40)
    assert grid.cell_area_m2 == 900.0
    assert class_histogram(grid).counts == (5, 93, 4, 30, 138, 718, 12)
    assert int(grid.frozen.sum()) == 105
    assert np.all(np.isin(grid.cells[grid.frozen], [LulcClass.URBAN, LulcClass.WETLAND]))


def test_seed_grid_is_deterministic():
    assert grid_csv_text(make_seed_grid()) == grid_csv_text(make_seed_grid())


def test_grid_round_trip_is_byte_identical(tmp_path):
    grid = make_seed_grid()
    first = write_grid_csv(grid, tmp_path / "grid.csv")
    mask = write_mask_csv(grid, tmp_path / "frozen.csv")
    loaded = read_grid_csv(first, mask)
    second = write_grid_csv(loaded, tmp_path / "again.csv")
    assert first.read_bytes() == second.read_bytes()
    np.testing.assert_array_equal(loaded.frozen, grid.frozen)
    assert first.read_text(encoding="utf-8").splitlines()[0] == "25,40,900.0"


@pytest.mark.parametrize("text", [
    "2,2,900\n0,1\n2\n",
    "2,2,900\n0,1\n2,9\n",
    "2,3,900\n0,1\n2,3\n",
    "2,2\n0,1\n2,3\n",
    "2,2,900\n0,x\n2,3\n",
    "",
])
def test_malformed_grids(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        read_grid_csv(path)


def test_error_line_numbers_count_blank_lines(tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("2,3,900\n\n0,1\n\n2,3\nx,4\n", encoding="utf-8")
    with pytest.raises(ConfigError) as exc_info:
        read_grid_csv(path)
    assert "строка 6" in str(exc_info.value)

    path.write_text("2,2,900\n\n0,1\n\n2,3\n", encoding="utf-8")
    grid = read_grid_csv(path)
    assert grid.as_rows().tolist() == [[0, 1], [2, 3]]


def test_mask_shape_mismatch(tmp_path):
    grid_path = tmp_path / "grid.csv"
    grid_path.write_text("2,1,900\n0,5\n", encoding="utf-8")
    mask_path = tmp_path / "mask.csv"
    mask_path.write_text("1,2,900\n0\n1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_grid_csv(grid_path, mask_path)

    mask_path.write_text("2,1,900\n0,2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_grid_csv(grid_path, mask_path)


def test_coefficient_csv(tmp_path):
    path = tmp_path / "c.csv"
    rows = ["class_name,coefficient", "water,0.9", "urban,0.8", "barren,0.6", "forest,0.2",
            "grassland,0.3", "agriculture,0.45", "wetland,0.1"]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    table = read_coefficient_csv(path, 25.0)
    assert table[LulcClass.AGRICULTURE] == 0.45
    assert table.intensity_mm_per_hr == 25.0

    path.write_text("\n".join(rows[:-1]) + "\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_coefficient_csv(path, 10.0)


def test_inline_coefficients_override_and_wetland_check():
    cfg = RunConfig()
    cfg.runoff.coefficients = {"forest": 0.2}
    assert load_coefficient_table(cfg)[LulcClass.FOREST] == 0.2

    cfg.runoff.coefficients = {"forest": 0.01}
    with pytest.raises(ConfigError):
        load_coefficient_table(cfg)
    cfg.runoff.require_wetland_minimum = False
    assert load_coefficient_table(cfg)[LulcClass.FOREST] == 0.01


def test_load_grid_adds_frozen_classes(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("3,1,100\n1,6,0\n", encoding="utf-8")
    cfg = RunConfig()
    cfg.grid.path = path
    grid = load_grid(cfg)
    assert grid.frozen.tolist() == [True, True, False]

    cfg.env.freeze_water = True
    assert load_grid(cfg).frozen.tolist() == [True, True, True]
