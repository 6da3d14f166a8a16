#!/usr/bin/env python3
"""
Тест хранилища: атомарная запись, целостность чекпоинтов, манифест запуска
"""

import json

import pytest

from errors import CheckpointError
from storage import (
    RunManifest,
    atomic_write_text,
    get_file_hash,
    load_checkpoint,
    save_checkpoint,
    stats_csv_text,
    verify_manifest,
)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    path = atomic_write_text(tmp_path / "nested" / "out.txt", "данные\n")
    assert path.read_text(encoding="utf-8") == "данные\n"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]


def test_checkpoint_round_trip(tmp_path):
    payload = {"update": 3, "weights": [[0.1, 0.2]], "seed": 1}
    path = save_checkpoint(tmp_path / "checkpoint.json", payload)
    document = load_checkpoint(path, required_fields=("update", "weights"))
    assert document["update"] == 3
    assert document["weights"] == [[0.1, 0.2]]
    assert document["format"] == "lulc-ppo-checkpoint"


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.update(update=4), "digest"),
    (lambda d: d.pop("digest"), "digest"),
    (lambda d: d.update(format="other"), "format"),
    (lambda d: d.update(format_version=99), "format_version"),
])
def test_corrupted_checkpoint_names_field(tmp_path, mutate, field):
    path = save_checkpoint(tmp_path / "checkpoint.json", {"update": 3})
    document = json.loads(path.read_text(encoding="utf-8"))
    mutate(document)
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(CheckpointError) as exc_info:
        load_checkpoint(path)
    assert exc_info.value.field == field
    assert field in str(exc_info.value)


def test_missing_and_unreadable_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(CheckpointError) as exc_info:
        load_checkpoint(broken)
    assert exc_info.value.field == "document"


def test_missing_required_field(tmp_path):
    path = save_checkpoint(tmp_path / "checkpoint.json", {"update": 0})
    with pytest.raises(CheckpointError) as exc_info:
        load_checkpoint(path, required_fields=("actor",))
    assert exc_info.value.field == "actor"


def test_stats_csv_text():
    rows = [{"update": 1, "mean_reward": 0.5, "policy_loss": -0.1, "value_loss": 0.2,
             "entropy": 1.9, "clip_fraction": 0.0, "final_episode_runoff_m3_per_s": 1.04975}]
    lines = stats_csv_text(rows).splitlines()
    assert len(lines) == 2
    assert lines[1] == "1,0.5,-0.1,0.2,1.9,0.0,1.04975"


def test_manifest_digests_are_recomputable(tmp_path):
    source = atomic_write_text(tmp_path / "grid.csv", "1,1,900.0\n0\n")
    output = atomic_write_text(tmp_path / "out.csv", "label,runoff_m3_per_s\n")
    manifest = RunManifest("evaluate", {"seed": 5}, 5)
    manifest.add_input(source)
    manifest.add_output(output)
    path = manifest.write(tmp_path / "manifest.json")

    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["command"] == "evaluate"
    assert document["seed"] == 5
    assert document["inputs"][str(source)] == get_file_hash(source)
    assert document["host"]["cpu_count"] >= 1
    assert all(verify_manifest(path).values())

    output.write_text("changed\n", encoding="utf-8")
    assert verify_manifest(path)[str(output)] is False
