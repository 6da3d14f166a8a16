"""
Общие фикстуры тестов
"""

import numpy as np
import pytest

from config import EnvConfig, PpoConfig, RunConfig
from raster_io import make_seed_grid
from runoff import CoefficientTable, LulcClass, LulcGrid


@pytest.fixture
def seed_grid() -> LulcGrid:
    return make_seed_grid()


@pytest.fixture
def default_table() -> CoefficientTable:
    return CoefficientTable.default()


@pytest.fixture
def env_cfg() -> EnvConfig:
    return EnvConfig()


@pytest.fixture
def toy_grid() -> LulcGrid:
    """2 пикселя: замороженный urban и изменяемый agriculture"""
    cells = np.array([LulcClass.URBAN, LulcClass.AGRICULTURE])
    return LulcGrid(2, 1, cells, 900.0).with_frozen_classes([LulcClass.URBAN])


@pytest.fixture
def small_run_config(tmp_path) -> RunConfig:
    """Быстрая конфигурация: маленькие сети и короткие роллауты"""
    cfg = RunConfig(
        seed=7,
        ppo=PpoConfig(
            rollout_horizon=64,
            minibatch_size=32,
            epochs_per_update=2,
            hidden_sizes=[8],
            total_updates=2,
            checkpoint_every=1,
        ),
    )
    cfg.output.directory = tmp_path / "run"
    return cfg
