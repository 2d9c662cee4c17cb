import numpy as np
import pytest

from genriem import builtin
from genriem.gencore import DilatonData
from genriem.riemannian import eval_point_geometry


def load_builtin(name):
    return builtin.load(name)[0].geometry


def point_geometry(name, point):
    return eval_point_geometry(load_builtin(name), np.asarray(point, dtype=float))


@pytest.fixture
def g4_pg():
    return point_geometry("G4", [0.11, -0.23, 0.17, 0.29])


@pytest.fixture
def g4_dd(g4_pg):
    return DilatonData.from_point(g4_pg)
