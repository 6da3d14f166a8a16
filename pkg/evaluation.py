"""
Оценка обученной политики: жадный проход по сетке, матрица переходов LULC,
сравнение стока (существующее состояние, сценарии, оптимизированный вариант) и отчеты
"""

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from config import EnvConfig  # noqa: E402
from environment import LulcEnv  # noqa: E402
from neural import Actor, sample  # noqa: E402
from raster_io import grid_csv_text  # noqa: E402
from rng import XorShift64Star  # noqa: E402
from runoff import (  # noqa: E402
    CLASS_NAMES,
    N_CLASSES,
    CoefficientTable,
    LulcClass,
    LulcGrid,
    RunoffResult,
    compute_runoff,
)
from scenarios import Scenario, scenario_runoff  # noqa: E402
from storage import atomic_write_bytes, atomic_write_text  # noqa: E402

logger = logging.getLogger(__name__)

EXISTING_LABEL = "existing"
OPTIMIZED_LABEL = "optimized"


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Число пикселей: строки: класс до, столбцы: класс после"""

    counts: np.ndarray

    @classmethod
    def from_cells(cls, before: np.ndarray, after: np.ndarray) -> "TransitionMatrix":
        flat = np.asarray(before, dtype=np.int64) * N_CLASSES + np.asarray(after, dtype=np.int64)
        counts = np.bincount(flat, minlength=N_CLASSES * N_CLASSES).reshape(N_CLASSES, N_CLASSES)
        return cls(counts)

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def column_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def shares(self) -> np.ndarray:
        totals = self.row_totals[:, None]
        return np.divide(self.counts, totals, out=np.zeros(self.counts.shape), where=totals > 0)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.counts, columns=list(CLASS_NAMES))
        frame.insert(0, "from", list(CLASS_NAMES))
        frame["total"] = self.row_totals
        return frame

    def shares_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.shares(), columns=list(CLASS_NAMES))
        frame.insert(0, "from", list(CLASS_NAMES))
        return frame


@dataclass
class ComparisonReport:
    entries: List[Tuple[str, float]]

    def value(self, label: str) -> float:
        return dict(self.entries)[label]

    @property
    def existing(self) -> float:
        return self.value(EXISTING_LABEL)

    @property
    def optimized(self) -> float:
        return self.value(OPTIMIZED_LABEL)

    @property
    def scenario_values(self) -> Dict[str, float]:
        return {label: value for label, value in self.entries
                if label not in (EXISTING_LABEL, OPTIMIZED_LABEL)}

    @property
    def optimized_below_existing(self) -> bool:
        return self.optimized < self.existing

    @property
    def optimized_is_minimum(self) -> bool:
        others = [value for label, value in self.entries if label != OPTIMIZED_LABEL]
        return all(self.optimized < value for value in others)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.entries, columns=["label", "runoff_m3_per_s"])


def run_greedy(grid: LulcGrid, actor: Actor, steps: int, env_cfg: EnvConfig,
               table: CoefficientTable, rng: Optional[XorShift64Star] = None
               ) -> Tuple[LulcGrid, TransitionMatrix, RunoffResult]:
    """
    steps шагов курсора с argmax по маскированным логитам
    (или с сэмплированием, если передан rng)
    """
    if steps < 0:
        raise ValueError(f"Число шагов не может быть отрицательным: {steps}")
    eval_cfg = env_cfg.model_copy(update={"steps_per_episode": max(steps, 1), "target_mode": "bonus"})
    env = LulcEnv(grid, eval_cfg, table)
    _, obs = env.reset()
    for _ in range(steps):
        dist = actor.distribution(obs, env.action_mask())
        action = dist.greedy() if rng is None else sample(dist, rng)[0]
        _, obs, _, _ = env.step(action)

    final_grid = env.working_grid()
    matrix = TransitionMatrix.from_cells(env.base.cells, final_grid.cells)
    return final_grid, matrix, compute_runoff(final_grid, table)


def compare_all(grid: LulcGrid, scenarios: Sequence[Scenario], actor: Actor,
                table: CoefficientTable, env_cfg: EnvConfig) -> ComparisonReport:
    """Сток существующего состояния, каждого сценария и оптимизированной сетки"""
    entries = [(EXISTING_LABEL, compute_runoff(grid, table).total_m3_per_s)]
    for scenario in sorted(scenarios, key=lambda s: s.name):
        entries.append((scenario.name, scenario_runoff(grid, scenario, table).total_m3_per_s))
    _, _, optimized = run_greedy(grid, actor, grid.pixel_count, env_cfg, table)
    entries.append((OPTIMIZED_LABEL, optimized.total_m3_per_s))

    report = ComparisonReport(entries)
    if not report.optimized_is_minimum:
        logger.warning("Оптимизированный сток не является строгим минимумом")
    return report


def comparison_svg(report: ComparisonReport) -> bytes:
    """Столбчатая диаграмма: один столбец на каждую метку отчета"""
    labels = [label for label, _ in report.entries]
    values = [value for _, value in report.entries]
    colors = ["#7f7f7f"] + ["#9ecae1"] * (len(labels) - 2) + ["#31a354"]

    with plt.rc_context({"svg.hashsalt": "lulc-ppo", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4))
        bars = ax.bar(labels, values, color=colors[:len(labels)])
        for bar, label in zip(bars, labels):
            bar.set_gid(f"bar-{label}")
        ax.set_ylabel("Runoff, m³/s")
        ax.set_title("Runoff: existing, scenarios, optimized")
        fig.tight_layout()
        buffer = io.BytesIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buffer.getvalue()


def _frame_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


def emit_reports(report: ComparisonReport, matrix: TransitionMatrix, out_dir,
                 final_grid: Optional[LulcGrid] = None) -> List[Path]:
    """comparison.csv, transition.csv, transition_share.csv, comparison.svg (+ final_grid.csv)"""
    out_dir = Path(out_dir)
    paths = [
        atomic_write_text(out_dir / "comparison.csv", _frame_csv(report.to_frame())),
        atomic_write_text(out_dir / "transition.csv", _frame_csv(matrix.to_frame())),
        atomic_write_text(out_dir / "transition_share.csv", _frame_csv(matrix.shares_frame())),
        atomic_write_bytes(out_dir / "comparison.svg", comparison_svg(report)),
    ]
    if final_grid is not None:
        paths.append(atomic_write_text(out_dir / "final_grid.csv", grid_csv_text(final_grid)))
    for path in paths:
        logger.info(f"Отчет сохранен: {path}")
    return paths


def wetland_conversion_share(initial: LulcGrid, final: LulcGrid) -> float:
    """Доля незамороженных пикселей, ставших wetland после прохода"""
    changeable = ~initial.frozen
    if not changeable.any():
        return 0.0
    return float(np.mean(final.cells[changeable] == int(LulcClass.WETLAND)))
