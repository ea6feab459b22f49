from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Callable

import pytest

from flatdisk.billiard import BilliardTable
from flatdisk.disk import CutSystem, FlatDisk, build_disk, compute_cut_system, load_spec

DISKS_DIR = Path(__file__).resolve().parent.parent / "disks"


@pytest.fixture
def disks_dir() -> Path:
    return DISKS_DIR


@pytest.fixture
def disk_json() -> Callable[[str], dict[str, Any]]:
    def load(name: str) -> dict[str, Any]:
        return json.loads((DISKS_DIR / f"{name}.json").read_text())

    return load


@pytest.fixture
def make_disk() -> Callable[[str], tuple[FlatDisk, CutSystem]]:
    def build(name: str) -> tuple[FlatDisk, CutSystem]:
        disk = build_disk(load_spec(DISKS_DIR / f"{name}.json"))
        return disk, compute_cut_system(disk)

    return build


@pytest.fixture
def make_table(make_disk) -> Callable[[str], BilliardTable]:
    def build(name: str) -> BilliardTable:
        return BilliardTable.build(*make_disk(name))

    return build
