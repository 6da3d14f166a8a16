"""
Хранилище результатов запуска: атомарная запись файлов, чекпоинты,
CSV статистики обучения и манифест запуска
"""

import hashlib
import json
import logging
import os
import tempfile
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import psutil

import config
from errors import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "lulc-ppo-checkpoint"
CHECKPOINT_FORMAT_VERSION = 1
STATS_COLUMNS = (
    "update",
    "mean_reward",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "final_episode_runoff_m3_per_s",
)


def atomic_write_bytes(path, data: bytes) -> Path:
    """Запись во временный файл рядом с целевым и переименование"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        raise OSError(f"Ошибка записи файла {path}: {e}") from e
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def get_file_hash(file_path) -> Optional[str]:
    """SHA-256 содержимого файла"""
    try:
        if not os.path.exists(file_path):
            return None
        with open(file_path, "rb") as f:
            return hashlib.sha256(f.read()).hexdigest()
    except Exception as e:
        logger.error(f"Ошибка получения хеша файла {file_path}: {e}")
        return None


def _canonical(payload: Dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def payload_digest(payload: Dict) -> str:
    return hashlib.sha256(_canonical(payload)).hexdigest()


def save_checkpoint(path, payload: Dict) -> Path:
    """Сохранение чекпоинта: payload + формат + SHA-256 дайджест"""
    document = dict(payload)
    document["format"] = CHECKPOINT_FORMAT
    document["format_version"] = CHECKPOINT_FORMAT_VERSION
    document["digest"] = payload_digest(document)
    text = json.dumps(document, sort_keys=True, indent=1) + "\n"
    atomic_write_text(path, text)
    logger.info(f"Чекпоинт сохранен: {path} (обновление {payload.get('update')})")
    return Path(path)


def load_checkpoint(path, required_fields: Iterable[str] = ()) -> Dict:
    """Загрузка и проверка целостности чекпоинта"""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Чекпоинт не найден: {path}", field="path")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Чекпоинт {path} не читается: {e}", field="document") from e
    if not isinstance(document, dict):
        raise CheckpointError(f"Чекпоинт {path} не является JSON-объектом", field="document")

    if document.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"Неизвестный формат чекпоинта {path}", field="format")
    if document.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"Версия формата {document.get('format_version')} не поддерживается ({path})",
            field="format_version",
        )
    stored_digest = document.pop("digest", None)
    if stored_digest is None:
        raise CheckpointError(f"В чекпоинте {path} нет дайджеста", field="digest")
    if payload_digest(document) != stored_digest:
        raise CheckpointError(f"Дайджест чекпоинта {path} не совпадает", field="digest")
    for field in required_fields:
        if field not in document:
            raise CheckpointError(f"В чекпоинте {path} нет поля '{field}'", field=field)
    return document


def stats_csv_text(rows: List[Dict]) -> str:
    lines = [",".join(STATS_COLUMNS)]
    for row in rows:
        lines.append(",".join(repr(row[column]) if isinstance(row[column], float) else str(row[column])
                              for column in STATS_COLUMNS))
    return "\n".join(lines) + "\n"


def write_stats_csv(path, rows: List[Dict]) -> Path:
    return atomic_write_text(path, stats_csv_text(rows))


class RunManifest:
    """Манифест запуска: снимок конфигурации, версии, времени, seed и дайджестов файлов"""

    def __init__(self, command: str, config_snapshot: Dict, seed: int):
        self.command = command
        self.config_snapshot = config_snapshot
        self.seed = seed
        self.started_at = datetime.now().isoformat(timespec="seconds")
        self.started_monotonic = time.monotonic()
        self.inputs: Dict[str, Optional[str]] = {}
        self.outputs: Dict[str, Optional[str]] = {}
        self.extra: Dict = {}

    def add_input(self, path):
        if path is not None:
            self.inputs[str(path)] = get_file_hash(path)

    def add_output(self, path):
        self.outputs[str(path)] = get_file_hash(path)

    def host_info(self) -> Dict:
        memory = psutil.virtual_memory()
        return {
            "cpu_count": psutil.cpu_count(logical=True),
            "memory_total_mb": round(memory.total / 1024 / 1024),
        }

    def to_dict(self) -> Dict:
        return {
            "command": self.command,
            "version": config.ARTIFACT_VERSION,
            "seed": self.seed,
            "started_at": self.started_at,
            "finished_at": datetime.now().isoformat(timespec="seconds"),
            "duration_s": round(time.monotonic() - self.started_monotonic, 3),
            "host": self.host_info(),
            "config": self.config_snapshot,
            "inputs": self.inputs,
            "outputs": self.outputs,
            **self.extra,
        }

    def write(self, path) -> Path:
        text = json.dumps(self.to_dict(), indent=2, ensure_ascii=False, sort_keys=True) + "\n"
        atomic_write_text(path, text)
        logger.info(f"Манифест запуска сохранен: {path}")
        return Path(path)


def verify_manifest(path) -> Dict[str, bool]:
    """Пересчет дайджестов всех файлов манифеста"""
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    result = {}
    for section in ("inputs", "outputs"):
        for file_path, digest in document.get(section, {}).items():
            result[file_path] = get_file_hash(file_path) == digest
    return result
