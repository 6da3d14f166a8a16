"""
Среда принятия решений по землепользованию

Курсор обходит пиксели построчно; действие: класс LULC для текущего пикселя,
награда: снижение стока (рациональный метод) после замены класса.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from config import EnvConfig
from errors import EmptyGrid, EpisodeFinished
from runoff import (
    ClassHistogram,
    CoefficientTable,
    LulcGrid,
    N_CLASSES,
    RATIONAL_UNIT_DIVISOR,
    class_histogram,
    histogram_runoff,
)

logger = logging.getLogger(__name__)

OBSERVATION_SIZE = 2 * N_CLASSES + 1
N_ACTIONS = N_CLASSES


@dataclass
class EnvState:
    cells: np.ndarray
    counts: np.ndarray
    cursor: int
    step: int
    baseline_runoff_m3_per_s: float
    current_runoff_m3_per_s: float
    cumulative_reduction_m3_per_s: float = 0.0
    target_reached: bool = False
    bonus_total: float = 0.0
    done: bool = False

    def copy(self) -> "EnvState":
        return EnvState(
            cells=self.cells.copy(),
            counts=self.counts.copy(),
            cursor=self.cursor,
            step=self.step,
            baseline_runoff_m3_per_s=self.baseline_runoff_m3_per_s,
            current_runoff_m3_per_s=self.current_runoff_m3_per_s,
            cumulative_reduction_m3_per_s=self.cumulative_reduction_m3_per_s,
            target_reached=self.target_reached,
            bonus_total=self.bonus_total,
            done=self.done,
        )


class LulcEnv:
    """Среда с замороженными классами, целевым снижением стока и маской действий"""

    def __init__(self, base: LulcGrid, cfg: EnvConfig, table: CoefficientTable):
        if base.pixel_count == 0:
            raise EmptyGrid("Сетка не содержит пикселей")
        self.base = base.with_frozen_classes(cfg.frozen_class_set())
        self.cfg = cfg
        self.table = table
        self.steps_per_episode = cfg.steps_per_episode or self.base.pixel_count
        self.reward_scale = cfg.reward_scale
        self._coefficients = table.as_array()
        self._flow_factor = table.intensity_mm_per_hr * self.base.cell_area_m2 / RATIONAL_UNIT_DIVISOR
        self.state = None

    @property
    def pixel_count(self) -> int:
        return self.base.pixel_count

    def reset(self) -> Tuple[EnvState, np.ndarray]:
        """Рабочая копия исходной сетки, курсор на пикселе 0"""
        hist = class_histogram(self.base)
        baseline = histogram_runoff(hist, self.table, self.base.cell_area_m2).total_m3_per_s
        self.state = EnvState(
            cells=np.array(self.base.cells, copy=True),
            counts=hist.as_array(),
            cursor=0,
            step=0,
            baseline_runoff_m3_per_s=baseline,
            current_runoff_m3_per_s=baseline,
        )
        return self.state, self.observe()

    def observe(self) -> np.ndarray:
        """one-hot класса под курсором ++ доли классов ++ прогресс эпизода"""
        state = self.state
        observation = np.zeros(OBSERVATION_SIZE, dtype=np.float64)
        observation[state.cells[state.cursor]] = 1.0
        observation[N_CLASSES:2 * N_CLASSES] = state.counts / self.pixel_count
        observation[-1] = state.step / self.steps_per_episode
        return observation

    def action_mask(self) -> np.ndarray:
        """Замороженный пиксель допускает только свой текущий класс"""
        state = self.state
        if self.base.frozen[state.cursor]:
            mask = np.zeros(N_ACTIONS, dtype=bool)
            mask[state.cells[state.cursor]] = True
            return mask
        return np.ones(N_ACTIONS, dtype=bool)

    def step(self, action: int) -> Tuple[EnvState, np.ndarray, float, bool]:
        state = self.state
        if state is None or state.done:
            raise EpisodeFinished("Эпизод завершен, нужен reset()")
        action = int(action)
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"Недопустимое действие {action}")

        cursor = state.cursor
        old_class = int(state.cells[cursor])
        reward = 0.0
        if not self.base.frozen[cursor] and action != old_class:
            delta_c = self._coefficients[old_class] - self._coefficients[action]
            reward = delta_c * self._flow_factor * self.reward_scale
            state.cells[cursor] = action
            state.counts[old_class] -= 1
            state.counts[action] += 1
            state.current_runoff_m3_per_s = histogram_runoff(
                ClassHistogram(tuple(state.counts)), self.table, self.base.cell_area_m2
            ).total_m3_per_s

        previous_reduction = state.cumulative_reduction_m3_per_s
        state.cumulative_reduction_m3_per_s = state.baseline_runoff_m3_per_s - state.current_runoff_m3_per_s

        target = self.cfg.target_reduction_m3_per_s
        crossed = (not state.target_reached
                   and previous_reduction < target <= state.cumulative_reduction_m3_per_s)
        if crossed:
            state.target_reached = True
            state.bonus_total += self.cfg.target_bonus
            reward += self.cfg.target_bonus
            logger.debug(f"Целевое снижение стока {target} м³/с достигнуто на шаге {state.step}")

        state.step += 1
        state.cursor = (cursor + 1) % self.pixel_count
        state.done = state.step >= self.steps_per_episode or (
            crossed and self.cfg.target_mode == 'terminate'
        )
        return state, self.observe(), reward, state.done

    def working_grid(self) -> LulcGrid:
        return self.base.with_cells(self.state.cells)

    def get_state(self) -> EnvState:
        return self.state.copy()

    def set_state(self, state: EnvState):
        self.state = state.copy()
