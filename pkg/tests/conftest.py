import math

import numpy as np
import pytest

from weakpovm import io
from weakpovm.instrument import validate

SQ = math.sqrt


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def proj_qubit():
    return validate(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


@pytest.fixture
def pos_qubit():
    return validate(np.diag([SQ(0.7), SQ(0.3)]), np.diag([SQ(0.3), SQ(0.7)]))


@pytest.fixture
def trivial_qubit():
    return validate(np.eye(2) / SQ(2), np.eye(2) / SQ(2))


@pytest.fixture
def write_instrument(tmp_path):
    def _write(ops, name="inst.json"):
        path = tmp_path / name
        io.write_json(path, io.instrument_to_json(ops))
        return str(path)

    return _write
