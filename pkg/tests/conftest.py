"""Shared fixtures: reference spaces and kernels, built once per session."""

import numpy as np
import pytest

from harnacklab import JumpKernel, MetricMeasureSpace, build_space, make_kernel

PHI1 = {"family": "power", "alpha": 1.0}


@pytest.fixture(scope="session")
def z16():
    return build_space("torus", d=1, side=16, radius_window=(1.0, 2.0))


@pytest.fixture(scope="session")
def z32():
    return build_space("torus", d=1, side=32, radius_window=(1.0, 4.0))


@pytest.fixture(scope="session")
def z64():
    return build_space("torus", d=1, side=64, radius_window=(1.0, 8.0))


@pytest.fixture(scope="session")
def stable16(z16):
    return make_kernel(z16, PHI1, {"kind": "stable-like"})


@pytest.fixture(scope="session")
def stable32(z32):
    return make_kernel(z32, PHI1, {"kind": "stable-like"})


@pytest.fixture(scope="session")
def stable64(z64):
    return make_kernel(z64, PHI1, {"kind": "stable-like"})


@pytest.fixture(scope="session")
def two_state():
    dist = np.array([[0.0, 1.0], [1.0, 0.0]])
    space = MetricMeasureSpace(dist, np.ones(2), (0.1, 0.25),
                               {"kind": "custom"})
    kernel = JumpKernel(np.array([[0.0, 1.0], [1.0, 0.0]]), space)
    return space, kernel


@pytest.fixture(scope="session")
def cone48():
    space = build_space("torus", d=2, side=48, radius_window=(1.0, 6.0))
    kernel = make_kernel(space, PHI1, {
        "kind": "cone", "theta": float(np.cos(np.pi / 8)), "v": [1.0, 0.0]})
    return space, kernel


@pytest.fixture(scope="session")
def axis12():
    space = build_space("torus", d=3, side=12, radius_window=(1.0, 2.5))
    kernel = make_kernel(space, PHI1, {"kind": "axis", "alpha": 1.0})
    return space, kernel
