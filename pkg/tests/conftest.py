"""Shared fixtures: meshes and assembled operators are built once per module."""

import pytest

from jumpbem.mesh import make_icosphere
from jumpbem.operators import assemble_all


@pytest.fixture(scope="module")
def sphere1():
    return make_icosphere(1)


@pytest.fixture(scope="module")
def sphere2():
    return make_icosphere(2)


@pytest.fixture(scope="module")
def sphere3():
    return make_icosphere(3)


@pytest.fixture(scope="module")
def operators1(sphere1):
    return assemble_all(sphere1)


@pytest.fixture(scope="module")
def operators2(sphere2):
    return assemble_all(sphere2)


@pytest.fixture(scope="module")
def operators3(sphere3):
    return assemble_all(sphere3)
