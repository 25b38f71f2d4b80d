import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.optimize import root

from steepwell import (DegenerateDiscriminant, Field, NotInAdmissibleSet, Params, fibering_coeffs, project,
                       project_coeffs, scalar_project, strict_gap)
from steepwell.errors import NumericalError
from steepwell.functionals import energy
from steepwell.nehari import FiberingCoefficients

from conftest import gaussian, two_well_pots


def oracle_ts(c: FiberingCoefficients):
    """Solve T1 = T2 = 0 by a generic root finder, independent of the closed form."""
    f = lambda z: [c.A - c.P * z[0] ** 2 - c.R * z[1] ** 2, c.B - c.Q * z[1] ** 2 - c.R * z[0] ** 2]
    jac = lambda z: [[-2 * c.P * z[0], -2 * c.R * z[1]], [-2 * c.R * z[0], -2 * c.Q * z[1]]]
    sol = root(f, [math.sqrt(c.A / c.P), math.sqrt(c.B / c.Q)], jac=jac, method="lm", options={"xtol": 1e-15})
    assert np.max(np.abs(f(sol.x))) <= 1e-12 * max(c.A, c.B)
    return sol.x


def test_worked_tuple():
    c = FiberingCoefficients(2.0, 3.0, 1.0, 2.0, -1.0)
    assert c.D == 1.0
    pr = project_coeffs(c)
    assert pr.t == pytest.approx(math.sqrt(7), rel=1e-14)
    assert pr.s == pytest.approx(math.sqrt(5), rel=1e-14)
    t, s = oracle_ts(c)
    assert (t, s) == pytest.approx((math.sqrt(7), math.sqrt(5)), rel=1e-12)
    assert pr.is_local_max


def random_admissible(rng):
    A, B = rng.uniform(0.1, 10, 2)
    P, Q = rng.uniform(0.1, 10, 2)
    R = -rng.uniform(0, 0.99) * math.sqrt(P * Q)
    return FiberingCoefficients(A, B, P, Q, R)


def test_hundred_random_tuples():
    rng = np.random.default_rng(7)
    for _ in range(100):
        c = random_admissible(rng)
        pr = project_coeffs(c)
        assert max(abs(pr.T1), abs(pr.T2)) <= 1e-8 * max(c.A, c.B)
        t, s = oracle_ts(c)
        assert pr.t == pytest.approx(t, rel=1e-10) and pr.s == pytest.approx(s, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(A=st.floats(0.05, 50), B=st.floats(0.05, 50), P=st.floats(0.05, 50), Q=st.floats(0.05, 50),
       frac=st.floats(0.0, 0.98), seed=st.integers(0, 10_000))
def test_projection_is_the_max(A, B, P, Q, frac, seed):
    c = FiberingCoefficients(A, B, P, Q, -frac * math.sqrt(P * Q))
    pr = project_coeffs(c)
    assert pr.t > 0 and pr.s > 0 and pr.hessian_tt < 0 and pr.hessian_det > 0
    rng = np.random.default_rng(seed)
    tt = rng.uniform(0, 3 * pr.t, 100)
    ss = rng.uniform(0, 3 * pr.s, 100)
    assert np.all(c.T(tt, ss) <= pr.energy + 1e-12 * abs(pr.energy))
    assert pr.energy == pytest.approx(0.25 * (A * pr.t**2 + B * pr.s**2), rel=1e-10)


def test_decoupled_and_fixed_point():
    c = FiberingCoefficients(4.0, 9.0, 1.0, 4.0, 0.0)
    pr = project_coeffs(c)
    assert (pr.t, pr.s) == pytest.approx((2.0, 1.5), rel=1e-14)
    c2 = FiberingCoefficients(c.A * pr.t**2, c.B * pr.s**2, c.P * pr.t**4, c.Q * pr.s**4, 0.0)
    pr2 = project_coeffs(c2)
    assert (pr2.t, pr2.s) == pytest.approx((1.0, 1.0), abs=1e-10)


def test_errors():
    with pytest.raises(NotInAdmissibleSet):
        project_coeffs(FiberingCoefficients(1, 1, 1, 1, -1.0))
    with pytest.raises(NotInAdmissibleSet):
        project_coeffs(FiberingCoefficients(1, 1, 1, 1, -2.0))
    with pytest.raises(DegenerateDiscriminant):
        project_coeffs(FiberingCoefficients(1, 1, 1, 1, -(1 - 1e-14)))
    with pytest.raises(NumericalError):
        project_coeffs(FiberingCoefficients(-1, 1, 1, 1, 0.0))


def test_field_level(pots1d, rng):
    g = pots1d.grid
    p = Params(10.0, -1.0, 1.0, 1.0)
    u = Field(g, gaussian(g, -2.0, 0.5))
    v = Field(g, gaussian(g, 2.0, 0.5))
    c = fibering_coeffs(u, v, pots1d, p)
    assert abs(c.R) < 1e-12 * c.P
    assert strict_gap(u, v, pots1d, p) == pytest.approx(c.P * c.Q, rel=1e-12)
    # u == v with mu1 = mu2 = 1, beta = -1: equality case
    assert strict_gap(u, u, pots1d, p) == pytest.approx(0.0, abs=1e-12 * c.P**2)
    with pytest.raises(NotInAdmissibleSet):
        project(u, u, pots1d, p)
    with pytest.raises(ValueError):
        fibering_coeffs(u, Field.zeros(g), pots1d, p)


def test_projection_puts_pair_on_nehari(pots1d):
    g = pots1d.grid
    p = Params(5.0, -0.8, 1.1, 0.9)
    u = Field(g, gaussian(g, -1.5, 0.6, 0.4))
    v = Field(g, gaussian(g, -0.8, 0.7, 2.0))
    pr = project(u, v, pots1d, p)
    c = fibering_coeffs(Field(g, pr.t * u.values), Field(g, pr.s * v.values), pots1d, p)
    assert max(abs(x) for x in c.residuals(1.0, 1.0)) <= 1e-8 * max(c.A, c.B)
    e = energy(Field(g, pr.t * u.values), Field(g, pr.s * v.values), pots1d, p)
    assert e.total == pytest.approx(pr.energy, rel=1e-10)


def test_scalar_projection(pots1d):
    g = pots1d.grid
    p = Params(5.0, -1.0, 1.0, 1.0)
    w = Field(g, gaussian(g, -2.0, 0.5))
    t = scalar_project(w, "a", pots1d, p)
    assert scalar_project(Field(g, t * w.values), "a", pots1d, p) == pytest.approx(1.0, abs=1e-12)
    # beta = 0 two-component projection agrees with the scalar projections
    v = Field(g, gaussian(g, 2.0, 0.7, 1.5))
    pr = project(w, v, pots1d, p.replace(beta=0.0))
    assert pr.t == pytest.approx(t, rel=1e-12)
    assert pr.s == pytest.approx(scalar_project(v, "b", pots1d, p), rel=1e-12)
    with pytest.raises(ValueError):
        scalar_project(Field.zeros(g), "a", pots1d, p)


def test_scalar_formula():
    from steepwell.nehari import scalar_t
    assert scalar_t(4.0, 1.0) == 2.0
