import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steepwell import Field, Grid, GridMismatchError, InvalidFieldError
from steepwell.grid import (dump_field, integrate, laplacian, load_field, masked_grad_l2sq, masked_integrate, norms,
                            stiffness_matrix)


def test_grid_invariants():
    for dim in (1, 2, 3):
        g = Grid(dim, 11, 1.5)
        assert g.size == 11**dim
        assert g.weights().sum() == pytest.approx((2 * 1.5) ** dim, rel=1e-10)
        assert g.h == pytest.approx(0.3)


@pytest.mark.parametrize("bad", [dict(dim=4, n=10, L=1), dict(dim=1, n=7, L=1), dict(dim=1, n=10, L=0)])
def test_grid_rejects_bad_specs(bad):
    with pytest.raises(ValueError):
        Grid(**bad)


def test_field_boundary_and_immutability():
    g = Grid(2, 9, 1.0)
    f = Field(g, np.ones(g.shape))
    assert np.all(f.values[g.boundary_mask()] == 0)
    with pytest.raises(ValueError):
        f.values[3, 3] = 2.0
    with pytest.raises(AttributeError):
        f.values = None
    with pytest.raises(InvalidFieldError):
        Field(g, np.full(g.shape, np.nan))
    with pytest.raises(InvalidFieldError):
        Field(g, np.ones(5))


def test_laplacian_zero_and_linear():
    g = Grid(1, 41, 1.0)
    assert np.all(laplacian(Field.zeros(g)).values == 0)
    x = g.axis()
    lap = laplacian(Field(g, x, enforce_dirichlet=False)).values
    assert np.allclose(lap[2:-2], 0.0, atol=1e-9)
    assert lap[0] == 0 and lap[-1] == 0


def _sine_error(n):
    L = np.pi / 2
    g = Grid(1, n, L)
    k = np.pi / (2 * L)
    f = Field.from_function(g, lambda x: np.sin(k * (x + L)))
    exact = -(k**2) * f.values
    return np.max(np.abs(laplacian(f).values - exact))


def test_laplacian_sine_and_order():
    assert _sine_error(401) < 1e-3
    errs = [_sine_error(n) for n in (101, 201, 401)]
    # n -> 2n - 1 halves h exactly
    for e1, e2 in zip(errs, errs[1:]):
        assert 3.5 < e1 / e2 < 4.5


def test_integrate_examples():
    g = Grid(1, 201, 1.0)
    assert integrate(np.ones(g.shape), g) == pytest.approx(2.0, abs=1e-10)
    assert integrate(Field.zeros(g)) == 0
    g4 = Grid(1, 401, 1.0)
    assert integrate(g4.axis() ** 2, g4) == pytest.approx(2 / 3, abs=1e-5)


def test_integrate_affine_exact():
    g = Grid(2, 31, 2.0, center=(0.5, -1.0))
    x, y = g.coords()
    val = integrate(3.0 + 2.0 * x - 0.7 * y, g)
    exact = 16.0 * (3.0 + 2.0 * 0.5 - 0.7 * (-1.0))
    assert val == pytest.approx(exact, rel=1e-10)


def test_sech_norms():
    g = Grid(1, 2001, 20.0)
    f = Field.from_function(g, lambda x: np.sqrt(2) / np.cosh(x))
    nm = norms(f)
    assert nm.grad_l2sq == pytest.approx(4 / 3, rel=1e-3)
    assert nm.l2sq == pytest.approx(4.0, rel=1e-3)
    assert nm.l4_4 == pytest.approx(16 / 3, rel=1e-3)


def test_norms_zero_and_plateau_ratio():
    assert norms(Field.zeros(Grid(1, 20, 1.0))) == (0.0, 0.0, 0.0)
    ratios = []
    for taper in (0.2, 0.05, 0.0125):
        g = Grid(1, 4001, 1.0)
        c = 1.7
        f = Field.from_function(g, lambda x: c * np.clip((1 - np.abs(x)) / taper, 0, 1))
        nm = norms(f)
        ratios.append(abs(nm.l4_4 / nm.l2sq - c * c))
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] < 0.02


def test_masked_integrate():
    g = Grid(1, 201, 1.0)
    one = Field(g, np.ones(g.shape), enforce_dirichlet=False)
    assert masked_integrate(one, np.ones(g.shape, bool)) == pytest.approx(integrate(one))
    assert masked_integrate(one, np.zeros(g.shape, bool)) == 0
    assert masked_integrate(one, g.axis() <= 0) == pytest.approx(1.0, abs=g.h)
    with pytest.raises(GridMismatchError):
        masked_integrate(one, np.ones(5, bool))


def _random_dirichlet(g, rng):
    return Field(g, rng.standard_normal(g.shape))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), dim=st.integers(1, 3))
def test_symmetry_and_green(seed, dim):
    rng = np.random.default_rng(seed)
    g = Grid(dim, {1: 40, 2: 15, 3: 9}[dim], 1.3)
    f, q = _random_dirichlet(g, rng), _random_dirichlet(g, rng)
    a = integrate(q.values * laplacian(f).values, g)
    b = integrate(f.values * laplacian(q).values, g)
    assert a == pytest.approx(b, rel=1e-8, abs=1e-8 * abs(a))
    green = -integrate(f.values * laplacian(f).values, g)
    assert green == pytest.approx(norms(f).grad_l2sq, rel=1e-6)


def test_stiffness_matches_gradient_energy(rng):
    g = Grid(2, 12, 1.0)
    f = _random_dirichlet(g, rng)
    free = g.interior_mask()
    K = stiffness_matrix(g, free)
    x = f.values[free]
    assert g.cell_volume * x @ (K @ x) == pytest.approx(norms(f).grad_l2sq, rel=1e-12)
    # Neumann restriction: only edges inside the mask are counted
    mask = free & (g.coords()[0] < 0.2)
    Kn = stiffness_matrix(g, mask, edge_mask=mask)
    y = f.values[mask]
    assert g.cell_volume * y @ (Kn @ y) == pytest.approx(masked_grad_l2sq(f, mask), rel=1e-12)


def test_dump_roundtrip(tmp_path, rng):
    g = Grid(2, 10, 2.5, center=(1.0, -1.0))
    f = Field(g, rng.standard_normal(g.shape))
    dump_field(f, tmp_path / "u", "u")
    back, name = load_field(tmp_path / "u")
    assert name == "u"
    assert back.grid == g
    assert back.values.tobytes() == f.values.tobytes()
    raw = np.fromfile(tmp_path / "u.bin", dtype="<f8")
    assert raw.size == g.size
