import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import get_config  # noqa: E402
from simulation.model import SourceModel  # noqa: E402


def preset_model(name: str) -> SourceModel:
    return SourceModel.from_dict(get_config(name)["model"])


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def close_distractors():
    return preset_model("close_distractors")


@pytest.fixture(scope="session")
def overestimate():
    return preset_model("overestimate")


@pytest.fixture(scope="session")
def known_binary():
    return preset_model("known_binary")


@pytest.fixture(scope="session")
def unknown_null():
    return preset_model("unknown_null")
