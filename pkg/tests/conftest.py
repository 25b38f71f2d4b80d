import warnings

import numpy as np
import pytest

from steepwell import Grid, Params, PotentialSpec, Well, WellGeometry, build_potentials


def two_well_pots(n=1601, L=14.0, a_inf=1.0, ramp=0.1, a0=1.0, b0=1.0, gap_centers=(-2.0, 2.0), hw=1.0, margin=0.4):
    g = Grid(1, n, L)
    geom = WellGeometry([Well((gap_centers[0],), (hw,))], [Well((gap_centers[1],), (hw,))], margin)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_potentials(geom, PotentialSpec(a_inf, a_inf, ramp, a0, b0), g)


@pytest.fixture
def pots1d():
    return two_well_pots()


@pytest.fixture
def params():
    return Params(lam=10.0, beta=-1.0, mu1=1.0, mu2=1.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian(grid, c, w, amp=1.0):
    x = grid.coords()
    r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, np.broadcast_to(c, (grid.dim,))))
    return amp * np.exp(-r2 / (2 * w * w))
