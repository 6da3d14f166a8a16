"""
Сценарии управления землепользованием: относительные изменения площадей классов
и детерминированное перераспределение пикселей с точным сохранением их числа
"""

import logging
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import pandas as pd

from errors import ConfigError, EmptyGrid, InfeasibleScenario
from runoff import (
    ClassHistogram,
    CoefficientTable,
    LulcClass,
    LulcGrid,
    N_CLASSES,
    RunoffResult,
    class_histogram,
    histogram_runoff,
)

logger = logging.getLogger(__name__)

NO_CHANGE_TOKEN = "nc"


@dataclass(frozen=True)
class Scenario:
    """Изменение по классам: None без изменений, иначе относительная доля p > -1"""

    name: str
    changes: Tuple[Optional[float], ...]

    def __post_init__(self):
        changes = tuple(self.changes)
        if len(changes) != N_CLASSES:
            raise ConfigError(f"Сценарий '{self.name}' должен описывать {N_CLASSES} классов")
        for lulc_class, change in zip(LulcClass, changes):
            if change is None:
                continue
            if not math.isfinite(change) or change <= -1.0:
                raise InfeasibleScenario(
                    f"Сценарий '{self.name}': изменение {change} для {lulc_class.label} "
                    f"должно быть больше -1",
                    lulc_class=lulc_class,
                )
        object.__setattr__(self, "changes", tuple(None if c is None else float(c) for c in changes))

    @classmethod
    def from_mapping(cls, name: str, changes: Mapping[LulcClass, float]) -> "Scenario":
        return cls(name, tuple(changes.get(lulc_class) for lulc_class in LulcClass))

    def change(self, lulc_class: LulcClass) -> Optional[float]:
        return self.changes[int(lulc_class)]

    @property
    def changed_classes(self) -> List[LulcClass]:
        return [lulc_class for lulc_class in LulcClass if self.change(lulc_class) is not None]


_B, _A, _G, _F, _W = (LulcClass.BARREN, LulcClass.AGRICULTURE, LulcClass.GRASSLAND,
                      LulcClass.FOREST, LulcClass.WETLAND)

BUILTIN_SCENARIOS: Dict[str, Dict[LulcClass, float]] = {
    "s1": {_B: -0.50, _A: -0.10, _G: +0.50, _W: +0.10},
    "s2": {_A: +0.10, _G: -0.50, _F: -0.10},
    "s3": {_B: +0.50, _A: +0.15, _G: -0.20},
    "s4": {_B: -0.50, _A: +0.20, _G: -0.875, _F: -0.50, _W: -0.50},
    "s5": {_B: -0.50, _A: -0.20, _G: +0.75, _F: +1.00, _W: +1.00},
}


def builtin_scenarios() -> List[Scenario]:
    """Пять сценариев управления s1..s5"""
    return [Scenario.from_mapping(name, changes) for name, changes in BUILTIN_SCENARIOS.items()]


def identity_scenario(name: str = "identity") -> Scenario:
    return Scenario(name, (None,) * N_CLASSES)


def load_scenario_file(path) -> Scenario:
    """CSV 'class_name,delta'; delta: доля со знаком или 'nc'"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, comment="#")
    except Exception as e:
        raise ConfigError(f"Не удалось прочитать сценарий {path}: {e}") from e
    if list(frame.columns) != ["class_name", "delta"]:
        raise ConfigError(f"{path}: ожидается заголовок 'class_name,delta'")

    changes = {}
    for index, (name, delta) in enumerate(frame.itertuples(index=False), start=2):
        lulc_class = LulcClass.from_name(str(name))
        if lulc_class in changes:
            raise ConfigError(f"{path}, строка {index}: класс {lulc_class.label} указан дважды")
        token = "" if pd.isna(delta) else str(delta).strip().lower()
        if token in ("", "nan"):
            raise ConfigError(f"{path}, строка {index}: не указано изменение для {lulc_class.label}")
        if token == NO_CHANGE_TOKEN:
            changes[lulc_class] = None
            continue
        try:
            changes[lulc_class] = float(token)
        except ValueError as e:
            raise ConfigError(f"{path}, строка {index}: некорректное изменение '{delta}'") from e
    return Scenario.from_mapping(path.stem, changes)


def resolve_scenario(scenario_id: str) -> Scenario:
    """Встроенный сценарий (s1..s5) или путь к файлу сценария"""
    key = scenario_id.strip().lower()
    if key in BUILTIN_SCENARIOS:
        return Scenario.from_mapping(key, BUILTIN_SCENARIOS[key])
    path = Path(scenario_id)
    if not path.exists():
        raise ConfigError(f"Сценарий не найден: '{scenario_id}' (ожидается s1..s5 или путь к CSV)")
    return load_scenario_file(path)


def round_half_away(value: Decimal) -> int:
    return int(value.to_integral_value(rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ReallocationReport:
    scenario_name: str
    before: ClassHistogram
    targets: Tuple[int, ...]
    after: ClassHistogram
    residual: int
    residual_assigned_to: Optional[LulcClass]


def apply_scenario(hist: ClassHistogram, scenario: Scenario) -> ReallocationReport:
    """
    Применение сценария к гистограмме классов

    Цель класса: round(count · (1 + p)) с округлением половины от нуля.
    Остаток (total - сумма целей) получает измененный класс с наибольшим
    запрошенным приростом в пикселях (при равенстве меньший код).
    """
    total = hist.total
    if total == 0:
        raise EmptyGrid("Гистограмма не содержит пикселей")

    targets = []
    for lulc_class in LulcClass:
        count = hist[lulc_class]
        change = scenario.change(lulc_class)
        if change is None:
            targets.append(count)
            continue
        target = round_half_away(Decimal(count) * (Decimal(1) + Decimal(repr(change))))
        if target < 0:
            raise InfeasibleScenario(
                f"Сценарий '{scenario.name}': отрицательная цель для {lulc_class.label}",
                lulc_class=lulc_class,
            )
        targets.append(target)

    residual = total - sum(targets)
    changed = scenario.changed_classes
    if not changed:
        return ReallocationReport(scenario.name, hist, tuple(targets), hist, 0, None)

    candidates = sorted(changed, key=lambda k: (-(targets[k] - hist[k]), int(k)))
    assigned = next((k for k in candidates if targets[k] + residual >= 0), None)
    if assigned is None:
        raise InfeasibleScenario(
            f"Сценарий '{scenario.name}': остаток {residual} нельзя отнести ни к одному "
            f"измененному классу",
            lulc_class=candidates[0],
        )
    if assigned != candidates[0]:
        logger.warning(
            f"Сценарий '{scenario.name}': остаток {residual} не помещается в "
            f"{candidates[0].label}, отнесен к {assigned.label}"
        )

    after = list(targets)
    after[assigned] += residual
    logger.debug(
        f"Сценарий '{scenario.name}': цели {targets}, остаток {residual} → {assigned.label}"
    )
    return ReallocationReport(
        scenario.name, hist, tuple(targets), ClassHistogram(tuple(after)), residual, assigned
    )


def scenario_runoff(grid: LulcGrid, scenario: Scenario, table: CoefficientTable) -> RunoffResult:
    """Сток после применения сценария к гистограмме сетки"""
    report = apply_scenario(class_histogram(grid), scenario)
    return histogram_runoff(report.after, table, grid.cell_area_m2)
