"""
Чтение и запись входных данных: CSV-растр классов, маска заморозки,
таблица коэффициентов стока; встроенная тестовая сетка
"""

import logging
from pathlib import Path
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd

from config import RunConfig
from errors import ConfigError
from rng import XorShift64Star
from runoff import (
    CoefficientTable,
    DEFAULT_COEFFICIENTS,
    LulcClass,
    LulcGrid,
    N_CLASSES,
)
from storage import atomic_write_text

logger = logging.getLogger(__name__)

# Итоговые числа пикселей по классам (water, urban, barren, forest, grassland, agriculture, wetland)
SEED_GRID_COUNTS = (5, 93, 4, 30, 138, 718, 12)
SEED_GRID_WIDTH = 25
SEED_GRID_HEIGHT = 40
SEED_GRID_CELL_AREA_M2 = 900.0
SEED_GRID_FROZEN = (LulcClass.URBAN, LulcClass.WETLAND)
SEED_GRID_SHUFFLE_SEED = 1000


def _read_matrix(path: Path) -> Tuple[str, np.ndarray]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"Не удалось прочитать {path}: {e}") from e
    numbered = [(number, line) for number, line in enumerate(lines, start=1) if line.strip()]
    if not numbered:
        raise ConfigError(f"Пустой файл растра: {path}")
    header = numbered[0][1]
    rows = []
    for line_number, line in numbered[1:]:
        try:
            rows.append([int(value) for value in line.split(",")])
        except ValueError as e:
            raise ConfigError(f"{path}, строка {line_number}: нецелое значение ({e})") from e
    widths = {len(row) for row in rows}
    if len(widths) > 1:
        raise ConfigError(f"{path}: строки разной длины {sorted(widths)}")
    return header, np.array(rows, dtype=np.int64)


def _parse_header(path: Path, header: str) -> Tuple[int, int, float]:
    parts = header.split(",")
    if len(parts) != 3:
        raise ConfigError(f"{path}, строка 1: ожидается 'width,height,cell_area_m2'")
    try:
        return int(parts[0]), int(parts[1]), float(parts[2])
    except ValueError as e:
        raise ConfigError(f"{path}, строка 1: некорректный заголовок ({e})") from e


def _check_shape(path: Path, matrix: np.ndarray, width: int, height: int):
    if matrix.shape != (height, width):
        raise ConfigError(
            f"{path}: размер {matrix.shape[1] if matrix.ndim == 2 else 0}x{matrix.shape[0]} "
            f"не совпадает с заголовком {width}x{height}"
        )


def read_grid_csv(path, frozen_path=None) -> LulcGrid:
    """Загрузка растра классов (и маски заморозки того же размера)"""
    path = Path(path)
    header, matrix = _read_matrix(path)
    width, height, cell_area = _parse_header(path, header)
    _check_shape(path, matrix, width, height)
    bad = (matrix < 0) | (matrix >= N_CLASSES)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise ConfigError(f"{path}, строка {row + 2}: код класса {matrix[row, col]} вне 0..{N_CLASSES - 1}")

    frozen = None
    if frozen_path is not None:
        frozen = read_mask_csv(frozen_path, width, height)
    grid = LulcGrid(width, height, matrix.reshape(-1), cell_area, frozen)
    logger.info(f"Загружена сетка {path}: {width}x{height}, площадь пикселя {cell_area} м²")
    return grid


def read_mask_csv(path, width: int, height: int) -> np.ndarray:
    """Маска заморозки: тот же формат, значения 0/1"""
    path = Path(path)
    header, matrix = _read_matrix(path)
    mask_width, mask_height, _ = _parse_header(path, header)
    if (mask_width, mask_height) != (width, height):
        raise ConfigError(f"{path}: размер маски {mask_width}x{mask_height} вместо {width}x{height}")
    _check_shape(path, matrix, width, height)
    if not np.isin(matrix, (0, 1)).all():
        raise ConfigError(f"{path}: маска должна содержать только 0 и 1")
    return matrix.reshape(-1).astype(bool)


def _matrix_text(width: int, height: int, cell_area_m2: float, rows: np.ndarray) -> str:
    lines = [f"{width},{height},{cell_area_m2!r}"]
    lines.extend(",".join(str(int(value)) for value in row) for row in rows)
    return "\n".join(lines) + "\n"


def grid_csv_text(grid: LulcGrid) -> str:
    return _matrix_text(grid.width, grid.height, grid.cell_area_m2, grid.as_rows())


def mask_csv_text(grid: LulcGrid) -> str:
    rows = grid.frozen.reshape(grid.height, grid.width).astype(np.int64)
    return _matrix_text(grid.width, grid.height, grid.cell_area_m2, rows)


def write_grid_csv(grid: LulcGrid, path) -> Path:
    return atomic_write_text(path, grid_csv_text(grid))


def write_mask_csv(grid: LulcGrid, path) -> Path:
    return atomic_write_text(path, mask_csv_text(grid))


def read_coefficient_csv(path, intensity_mm_per_hr: float) -> CoefficientTable:
    """CSV 'class_name,coefficient' → таблица коэффициентов"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, comment="#")
    except Exception as e:
        raise ConfigError(f"Не удалось прочитать таблицу коэффициентов {path}: {e}") from e
    if list(frame.columns) != ["class_name", "coefficient"]:
        raise ConfigError(f"{path}: ожидается заголовок 'class_name,coefficient'")

    coefficients = {}
    for index, (name, value) in enumerate(frame.itertuples(index=False), start=2):
        lulc_class = LulcClass.from_name(str(name))
        if lulc_class in coefficients:
            raise ConfigError(f"{path}, строка {index}: класс {lulc_class.label} указан дважды")
        try:
            coefficients[lulc_class] = float(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{path}, строка {index}: некорректный коэффициент '{value}'") from e
    return CoefficientTable.from_mapping(coefficients, intensity_mm_per_hr)


def make_seed_grid(frozen_classes: Iterable[LulcClass] = SEED_GRID_FROZEN) -> LulcGrid:
    """Детерминированная сетка 25x40 с итоговыми числами пикселей по классам"""
    codes = []
    for lulc_class, count in zip(LulcClass, SEED_GRID_COUNTS):
        codes.extend([int(lulc_class)] * count)
    XorShift64Star(SEED_GRID_SHUFFLE_SEED).shuffle(codes)
    grid = LulcGrid(SEED_GRID_WIDTH, SEED_GRID_HEIGHT, np.array(codes), SEED_GRID_CELL_AREA_M2)
    return grid.with_frozen_classes(frozen_classes)


def load_coefficient_table(cfg: RunConfig) -> CoefficientTable:
    runoff = cfg.runoff
    if runoff.coefficients_path is not None:
        table = read_coefficient_csv(runoff.coefficients_path, runoff.rainfall_intensity_mm_hr)
        coefficients = {lulc_class: table[lulc_class] for lulc_class in LulcClass}
    else:
        coefficients = dict(DEFAULT_COEFFICIENTS)
    for name, value in runoff.coefficients.items():
        coefficients[LulcClass.from_name(name)] = value
    table = CoefficientTable.from_mapping(coefficients, runoff.rainfall_intensity_mm_hr)
    if runoff.require_wetland_minimum:
        table.check_wetland_minimum()
    return table


def load_grid(cfg: RunConfig, frozen_classes: Optional[Iterable[LulcClass]] = None) -> LulcGrid:
    """Сетка из конфигурации; маска дополняется замороженными классами среды"""
    if frozen_classes is None:
        frozen_classes = cfg.env.frozen_class_set()
    if cfg.grid.path is None:
        grid = make_seed_grid(())
    else:
        grid = read_grid_csv(cfg.grid.path, cfg.grid.frozen_path)
    return grid.with_frozen_classes(frozen_classes)


def load_inputs(cfg: RunConfig) -> Tuple[LulcGrid, CoefficientTable]:
    return load_grid(cfg), load_coefficient_table(cfg)
