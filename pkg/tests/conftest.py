from functools import lru_cache

import numpy as np
import pytest

from restricted_auctions import AllocationSet, DensitySpec, transform

ACCEPTANCE_LINES = []

UNIT_SQUARE = DensitySpec.uniform([1.0, 1.0])
AT_MOST_ONE = AllocationSet([[0, 0], [1, 0], [0, 1]])
EXACTLY_ONE = AllocationSet([[1, 0], [0, 1]])
EXPO = DensitySpec.exponential([2.0, 1.0], [8.0, 8.0])


@lru_cache(maxsize=None)
def uniform_mu(resolution: int):
    return transform(UNIT_SQUARE, resolution=resolution)


@lru_cache(maxsize=None)
def expo_mu(resolution: int):
    return transform(EXPO, resolution=resolution)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def record(line: str):
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
