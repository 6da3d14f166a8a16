"""
Сетка классов землепользования (LULC) и расчет стока рациональным методом

Q [м³/с] = C · i [мм/ч] · A [м²] / 3.6e6
"""

import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from errors import ConfigError, EmptyGrid

logger = logging.getLogger(__name__)

# мм/ч · м² → м³/с
RATIONAL_UNIT_DIVISOR = 3.6e6


class LulcClass(IntEnum):
    WATER = 0
    URBAN = 1
    BARREN = 2
    FOREST = 3
    GRASSLAND = 4
    AGRICULTURE = 5
    WETLAND = 6

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "LulcClass":
        """Класс по имени (регистр и пробелы не важны)"""
        key = name.strip().upper()
        if key not in cls.__members__:
            raise ConfigError(f"Неизвестный класс LULC: '{name}'")
        return cls[key]


N_CLASSES = len(LulcClass)
CLASS_NAMES = tuple(lulc_class.label for lulc_class in LulcClass)

DEFAULT_COEFFICIENTS = {
    LulcClass.WATER: 0.95,
    LulcClass.URBAN: 0.85,
    LulcClass.BARREN: 0.60,
    LulcClass.FOREST: 0.15,
    LulcClass.GRASSLAND: 0.30,
    LulcClass.AGRICULTURE: 0.40,
    LulcClass.WETLAND: 0.05,
}
DEFAULT_RAINFALL_INTENSITY_MM_HR = 10.0


def _read_only(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class LulcGrid:
    """Растр классов LULC (построчно) с единой площадью пикселя и маской заморозки"""

    width: int
    height: int
    cells: np.ndarray
    cell_area_m2: float
    frozen: np.ndarray = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise EmptyGrid(f"Пустая сетка {self.width}x{self.height}")
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1)
        if cells.size != self.width * self.height:
            raise ConfigError(
                f"Число ячеек {cells.size} не равно {self.width}x{self.height}"
            )
        if cells.min() < 0 or cells.max() >= N_CLASSES:
            raise ConfigError(f"Коды классов должны быть в диапазоне 0..{N_CLASSES - 1}")
        if not (self.cell_area_m2 > 0 and math.isfinite(self.cell_area_m2)):
            raise ConfigError(f"Площадь пикселя должна быть положительной: {self.cell_area_m2}")

        if self.frozen is None:
            frozen = np.zeros(cells.size, dtype=bool)
        else:
            frozen = np.asarray(self.frozen, dtype=bool).reshape(-1)
            if frozen.size != cells.size:
                raise ConfigError(
                    f"Маска заморозки содержит {frozen.size} ячеек вместо {cells.size}"
                )

        object.__setattr__(self, "cells", _read_only(cells))
        object.__setattr__(self, "frozen", _read_only(frozen))
        object.__setattr__(self, "cell_area_m2", float(self.cell_area_m2))

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    @property
    def total_area_m2(self) -> float:
        return self.pixel_count * self.cell_area_m2

    def as_rows(self) -> np.ndarray:
        return self.cells.reshape(self.height, self.width)

    def with_frozen_classes(self, classes: Iterable[LulcClass]) -> "LulcGrid":
        """Новая сетка: маска дополнена всеми пикселями указанных классов"""
        codes = [int(lulc_class) for lulc_class in classes]
        frozen = self.frozen | np.isin(self.cells, codes)
        return LulcGrid(self.width, self.height, self.cells, self.cell_area_m2, frozen)

    def with_cells(self, cells: np.ndarray) -> "LulcGrid":
        """Та же геометрия и маска, другие классы"""
        return LulcGrid(self.width, self.height, cells, self.cell_area_m2, self.frozen)


@dataclass(frozen=True)
class ClassHistogram:
    counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(count) for count in self.counts)
        if len(counts) != N_CLASSES:
            raise ConfigError(f"Гистограмма должна содержать {N_CLASSES} классов")
        if any(count < 0 for count in counts):
            raise ConfigError(f"Отрицательное число пикселей в гистограмме: {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_mapping(cls, counts: Mapping[LulcClass, int]) -> "ClassHistogram":
        return cls(tuple(counts.get(lulc_class, 0) for lulc_class in LulcClass))

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __getitem__(self, lulc_class: LulcClass) -> int:
        return self.counts[int(lulc_class)]

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    def as_dict(self) -> Dict[str, int]:
        return {name: count for name, count in zip(CLASS_NAMES, self.counts)}


@dataclass(frozen=True)
class CoefficientTable:
    """Коэффициенты стока C по классам и интенсивность осадков"""

    c: Tuple[float, ...]
    intensity_mm_per_hr: float = DEFAULT_RAINFALL_INTENSITY_MM_HR

    def __post_init__(self):
        c = tuple(float(value) for value in self.c)
        if len(c) != N_CLASSES:
            raise ConfigError(f"Таблица коэффициентов должна содержать {N_CLASSES} классов")
        for lulc_class, value in zip(LulcClass, c):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(
                    f"Коэффициент стока для {lulc_class.label} вне [0, 1]: {value}"
                )
        intensity = float(self.intensity_mm_per_hr)
        if not (intensity >= 0 and math.isfinite(intensity)):
            raise ConfigError(f"Некорректная интенсивность осадков: {intensity}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "intensity_mm_per_hr", intensity)

    @classmethod
    def default(cls, intensity_mm_per_hr: float = DEFAULT_RAINFALL_INTENSITY_MM_HR) -> "CoefficientTable":
        return cls.from_mapping(DEFAULT_COEFFICIENTS, intensity_mm_per_hr)

    @classmethod
    def from_mapping(cls, coefficients: Mapping[LulcClass, float],
                     intensity_mm_per_hr: float = DEFAULT_RAINFALL_INTENSITY_MM_HR) -> "CoefficientTable":
        missing = [lulc_class.label for lulc_class in LulcClass if lulc_class not in coefficients]
        if missing:
            raise ConfigError(f"Нет коэффициентов для классов: {', '.join(missing)}")
        return cls(tuple(coefficients[lulc_class] for lulc_class in LulcClass), intensity_mm_per_hr)

    def __getitem__(self, lulc_class: LulcClass) -> float:
        return self.c[int(lulc_class)]

    def as_array(self) -> np.ndarray:
        return np.array(self.c, dtype=np.float64)

    def check_wetland_minimum(self):
        """Водно-болотные угодья должны иметь строго минимальный коэффициент"""
        wetland = self[LulcClass.WETLAND]
        for lulc_class in LulcClass:
            if lulc_class != LulcClass.WETLAND and self[lulc_class] <= wetland:
                raise ConfigError(
                    f"Коэффициент wetland ({wetland}) не строго меньше, чем у "
                    f"{lulc_class.label} ({self[lulc_class]})"
                )

    def pixel_flow(self, lulc_class: int, cell_area_m2: float) -> float:
        """Сток одного пикселя, м³/с"""
        return self.c[lulc_class] * self.intensity_mm_per_hr * cell_area_m2 / RATIONAL_UNIT_DIVISOR


@dataclass(frozen=True)
class RunoffResult:
    total_m3_per_s: float
    per_class_m3_per_s: Tuple[float, ...]
    composite_c: float


def class_histogram(grid: LulcGrid) -> ClassHistogram:
    """Число пикселей каждого класса"""
    return ClassHistogram(tuple(np.bincount(grid.cells, minlength=N_CLASSES)))


def composite_coefficient(hist: ClassHistogram, table: CoefficientTable) -> float:
    """Площадно-взвешенный коэффициент C"""
    total = hist.total
    if total == 0:
        raise EmptyGrid("Гистограмма не содержит пикселей")
    weighted = math.fsum(c * count for c, count in zip(table.c, hist.counts))
    composite = weighted / total
    # fsum/деление может выйти за границы на последний бит
    return min(max(composite, min(table.c)), max(table.c))


def histogram_runoff(hist: ClassHistogram, table: CoefficientTable, cell_area_m2: float) -> RunoffResult:
    """Сток по гистограмме классов, без пространственной раскладки"""
    composite = composite_coefficient(hist, table)
    per_class = tuple(
        c * table.intensity_mm_per_hr * (count * cell_area_m2) / RATIONAL_UNIT_DIVISOR
        for c, count in zip(table.c, hist.counts)
    )
    return RunoffResult(
        total_m3_per_s=math.fsum(per_class),
        per_class_m3_per_s=per_class,
        composite_c=composite,
    )


def compute_runoff(grid: LulcGrid, table: CoefficientTable) -> RunoffResult:
    """Сток всей сетки рациональным методом"""
    return histogram_runoff(class_histogram(grid), table, grid.cell_area_m2)

