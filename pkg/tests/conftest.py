"""Shared fixtures: standard backgrounds, warp tables and grids."""

import math

import pytest

import kflow as kf

TORUS_THETA = (2.0 * math.pi) ** 2


@pytest.fixture(scope="session")
def params_flat():
    """n=3, kappa=0, m=1/2 over a (2 pi)^2 torus: the worked-example background."""
    return kf.SpaceParams(3, 0, 0.5, TORUS_THETA)


@pytest.fixture(scope="session")
def warp_flat(params_flat):
    return kf.build_warp_table(params_flat)


@pytest.fixture(scope="session")
def torus64(params_flat):
    return kf.make_grid("torus2d", 64, math.sqrt(params_flat.theta))


@pytest.fixture(scope="session")
def params_sphere():
    return kf.SpaceParams(3, 1, 1.0, 4.0 * math.pi)


@pytest.fixture(scope="session")
def warp_sphere(params_sphere):
    return kf.build_warp_table(params_sphere)


@pytest.fixture(scope="session")
def sphere64():
    return kf.make_grid("sphere_axisym", 64)


@pytest.fixture(scope="session")
def params_hyp_sym():
    return kf.SpaceParams(3, -1, 0.5, 4.0 * math.pi)


@pytest.fixture(scope="session")
def warp_hyp_sym(params_hyp_sym):
    return kf.build_warp_table(params_hyp_sym)


@pytest.fixture(scope="session")
def sym_grid(params_hyp_sym):
    return kf.make_grid("symmetric", 1, params_hyp_sym.theta, kappa=-1, n=3)


def rel_err(a, b):
    return abs(a - b) / max(1.0, abs(b))


@pytest.fixture(scope="session")
def slice_flat(torus64, warp_flat):
    return kf.slice_surface(torus64, warp_flat, lam_value=2.0)
