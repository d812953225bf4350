"""Shared fixtures: benchmark paths and small parsed theories."""

from __future__ import annotations

from pathlib import Path

import pytest

from eqdisco.lang import parse_theory

BENCH_DIR = Path(__file__).resolve().parent.parent / "src" / "eqdisco" / "benchmarks"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def bench(name: str) -> Path:
    return BENCH_DIR / name


def load_theory(name: str):
    return parse_theory(bench(name).read_text())


@pytest.fixture
def lists_theory():
    return load_theory("lists.smt2")


@pytest.fixture
def nat_theory():
    return load_theory("nat.smt2")


@pytest.fixture
def filter_theory():
    return load_theory("filter.smt2")


@pytest.fixture
def fold_theory():
    return load_theory("fold.smt2")


@pytest.fixture
def bench_dir() -> Path:
    return BENCH_DIR


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN_DIR
