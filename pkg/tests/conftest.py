import numpy as np
import pytest

from surfns.geometry import element_frames
from surfns.mesh import build_sphere, build_torus
from surfns.reference import quadrature_rule

# Meshes are immutable; share them across tests to keep the suite fast.


@pytest.fixture(scope="session")
def sphere_meshes():
    return {level: build_sphere(level) for level in range(4)}


@pytest.fixture(scope="session")
def torus_meshes():
    return {level: build_torus(level) for level in range(3)}


@pytest.fixture(scope="session")
def default_rule():
    return quadrature_rule()


@pytest.fixture(scope="session")
def sphere_frames(sphere_meshes, default_rule):
    return {
        level: element_frames(msh, rule=default_rule)
        for level, msh in sphere_meshes.items()
    }


def eoc(errors, hs):
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
