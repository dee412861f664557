from pathlib import Path

import numpy as np
import pytest

from dancerecal.motion import Skeleton, default_skeleton


@pytest.fixture(scope="session")
def skeleton():
    return default_skeleton()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def chain_skeleton(offset=(0.0, 1.0, 0.0)):
    """22 joints in a single chain, each offset by ``offset`` from its parent."""
    n = 22
    return Skeleton([f"j{i}" for i in range(n)], [-1] + list(range(n - 1)),
                    [[0.0, 0.0, 0.0]] + [list(offset)] * (n - 1), [], [n - 1, n - 2])


def random_spd(rng, d):
    a = rng.normal(size=(d, d))
    return a @ a.T + 0.1 * np.eye(d)


FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture(scope="session")
def fixtures():
    return FIXTURES
