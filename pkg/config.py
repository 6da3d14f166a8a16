import logging
import os
from pathlib import Path
from typing import Dict, List, Literal, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from errors import ConfigError
from runoff import DEFAULT_RAINFALL_INTENSITY_MM_HR, LulcClass

load_dotenv()

ARTIFACT_VERSION = "1.0.0"

# Logging
LOG_LEVEL = os.getenv('LULC_PPO_LOG', 'INFO').upper()
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Defaults for the CLI
DEFAULT_CONFIG_PATH = os.getenv('LULC_PPO_CONFIG')
DEFAULT_OUT_DIR = os.getenv('LULC_PPO_OUT', 'runs/latest')
DEFAULT_SEED = 20240601

U64_MAX = (1 << 64) - 1


def setup_logging(level: str = None):
    """Настройка логирования для всего процесса"""
    level_name = (level or LOG_LEVEL).upper()
    numeric_level = getattr(logging, level_name, None)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO
    logging.basicConfig(format=LOG_FORMAT, level=numeric_level, force=True)
    # matplotlib слишком подробен на DEBUG
    logging.getLogger('matplotlib').setLevel(logging.WARNING)


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', validate_assignment=True)


class GridConfig(_Section):
    # None → встроенная сетка по итоговым числам пикселей
    path: Optional[Path] = None
    # None → маска строится по env.frozen_classes
    frozen_path: Optional[Path] = None


class RunoffConfig(_Section):
    coefficients_path: Optional[Path] = None
    coefficients: Dict[str, float] = Field(default_factory=dict)
    rainfall_intensity_mm_hr: float = Field(DEFAULT_RAINFALL_INTENSITY_MM_HR, ge=0)
    require_wetland_minimum: bool = True

    @field_validator('coefficients')
    @classmethod
    def _known_classes(cls, value: Dict[str, float]) -> Dict[str, float]:
        for name, coefficient in value.items():
            LulcClass.from_name(name)
            if not 0.0 <= coefficient <= 1.0:
                raise ValueError(f"коэффициент {name}={coefficient} вне [0, 1]")
        return {name.strip().lower(): coefficient for name, coefficient in value.items()}


class EnvConfig(_Section):
    # None → один проход по всем пикселям
    steps_per_episode: Optional[int] = Field(None, ge=1)
    target_reduction_m3_per_s: float = Field(0.0, ge=0)
    target_bonus: float = Field(0.0, ge=0)
    target_mode: Literal['bonus', 'terminate'] = 'bonus'
    reward_scale: float = Field(1e3, gt=0)
    frozen_classes: List[str] = Field(default_factory=lambda: ['urban', 'wetland'])
    freeze_water: bool = False

    @field_validator('frozen_classes')
    @classmethod
    def _known_frozen(cls, value: List[str]) -> List[str]:
        return [LulcClass.from_name(name).label for name in value]

    def frozen_class_set(self) -> frozenset:
        classes = {LulcClass.from_name(name) for name in self.frozen_classes}
        if self.freeze_water:
            classes.add(LulcClass.WATER)
        return frozenset(classes)


class PpoConfig(_Section):
    gamma: float = Field(0.99, ge=0, le=1)
    gae_lambda: float = Field(0.95, ge=0, le=1)
    clip_epsilon: float = Field(0.2, gt=0, lt=1)
    epochs_per_update: int = Field(4, ge=1)
    minibatch_size: int = Field(256, ge=1)
    rollout_horizon: int = Field(2048, ge=1)
    value_coef: float = Field(0.5, ge=0)
    entropy_coef: float = Field(0.01, ge=0)
    learning_rate: float = Field(3e-4, gt=0)
    adam_beta1: float = Field(0.9, ge=0, lt=1)
    adam_beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    hidden_sizes: List[int] = Field(default_factory=lambda: [64, 64])
    total_updates: int = Field(200, ge=0)
    checkpoint_every: int = Field(25, ge=1)
    workers: int = Field(1, ge=1)

    @field_validator('hidden_sizes')
    @classmethod
    def _positive_layers(cls, value: List[int]) -> List[int]:
        if not value or any(size < 1 for size in value):
            raise ValueError("размеры скрытых слоев должны быть положительными")
        return value


class OutputConfig(_Section):
    directory: Path = Path(DEFAULT_OUT_DIR)


class RunConfig(_Section):
    seed: int = Field(DEFAULT_SEED, ge=0, le=U64_MAX)
    grid: GridConfig = Field(default_factory=GridConfig)
    runoff: RunoffConfig = Field(default_factory=RunoffConfig)
    env: EnvConfig = Field(default_factory=EnvConfig)
    ppo: PpoConfig = Field(default_factory=PpoConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def input_paths(self) -> List[Path]:
        paths = [self.grid.path, self.grid.frozen_path, self.runoff.coefficients_path]
        return [path for path in paths if path is not None]

    def snapshot(self) -> Dict:
        return self.model_dump(mode='json')

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.snapshot(), sort_keys=False, allow_unicode=True)


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = '.'.join(str(part) for part in item['loc'])
        parts.append(f"{location}: {item['msg']}")
    return '; '.join(parts)


def _resolve_paths(cfg: RunConfig, base_dir: Path) -> RunConfig:
    """Относительные пути считаются от каталога файла конфигурации"""
    def resolve(path):
        if path is None or path.is_absolute():
            return path
        return base_dir / path

    cfg.grid.path = resolve(cfg.grid.path)
    cfg.grid.frozen_path = resolve(cfg.grid.frozen_path)
    cfg.runoff.coefficients_path = resolve(cfg.runoff.coefficients_path)
    return cfg


def validate_paths(cfg: RunConfig):
    for path in cfg.input_paths():
        if not Path(path).exists():
            raise ConfigError(f"Файл не найден: {path}")


def load_run_config(path=None) -> RunConfig:
    """Загрузка YAML-конфигурации запуска; без пути используются значения по умолчанию"""
    path = path or DEFAULT_CONFIG_PATH
    if path is None:
        return RunConfig()

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Файл конфигурации не найден: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding='utf-8')) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Ошибка разбора YAML {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Конфигурация {path} должна быть YAML-словарем")

    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Некорректная конфигурация {path}: {_format_validation_error(e)}") from e

    cfg = _resolve_paths(cfg, path.parent)
    validate_paths(cfg)
    return cfg


def apply_overrides(cfg: RunConfig, seed: int = None, out=None, workers: int = None,
                    updates: int = None) -> RunConfig:
    """Флаги командной строки поверх файла конфигурации"""
    try:
        if seed is not None:
            cfg.seed = seed
        if out is not None:
            cfg.output.directory = Path(out)
        if workers is not None:
            cfg.ppo.workers = workers
        if updates is not None:
            cfg.ppo.total_updates = updates
    except ValidationError as e:
        raise ConfigError(f"Некорректный параметр командной строки: {_format_validation_error(e)}") from e
    return cfg
