"""Energy J, its L2 gradient, subdomain energies and concentration diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GridMismatchError
from .grid import Field, grad_sq_values, laplacian_values
from .potentials import PotentialSet, region_masks, well_masks


@dataclass(frozen=True)
class Params:
    lam: float
    beta: float
    mu1: float = 1.0
    mu2: float = 1.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.beta <= 0:
            raise ValueError(f"beta must be <= 0 (repulsive coupling), got {self.beta}")
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise ValueError("mu1 and mu2 must be positive")

    def mu(self, side: str) -> float:
        return self.mu1 if side == "a" else self.mu2

    def replace(self, **kw) -> "Params":
        d = asdict(self)
        d.update(kw)
        return Params(**d)


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    kinetic_u: float
    kinetic_v: float
    potential_u: float
    potential_v: float
    quartic_u: float
    quartic_v: float
    coupling: float

    @property
    def norm_a_lambda_sq(self) -> float:
        return self.kinetic_u + self.potential_u

    @property
    def norm_b_lambda_sq(self) -> float:
        return self.kinetic_v + self.potential_v

    def recomposed(self) -> float:
        return (0.5 * (self.kinetic_u + self.potential_u) + 0.5 * (self.kinetic_v + self.potential_v)
                - self.quartic_u - self.quartic_v - self.coupling)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["norm_a_lambda_sq"] = self.norm_a_lambda_sq
        d["norm_b_lambda_sq"] = self.norm_b_lambda_sq
        return d


def _pair(u, v, pots: PotentialSet):
    for f in (u, v):
        if not isinstance(f, Field):
            raise TypeError("expected Field arguments")
        pots.check_grid(f.grid)
    return u.values, v.values


def breakdown_from_values(u, v, Va, Vb, p: Params, grid, quartic=None, coupling=None) -> EnergyBreakdown:
    """Assemble an EnergyBreakdown from raw arrays; ``quartic``/``coupling`` override the plain terms."""
    w = grid.weights()
    ku = grad_sq_values(u, grid.h)
    kv = grad_sq_values(v, grid.h)
    pu = float(np.sum(w * Va * u * u))
    pv = float(np.sum(w * Vb * v * v))
    if quartic is None:
        qu = 0.25 * p.mu1 * float(np.sum(w * u**4))
        qv = 0.25 * p.mu2 * float(np.sum(w * v**4))
    else:
        qu, qv = quartic
    if coupling is None:
        coupling = 0.5 * p.beta * float(np.sum(w * u * u * v * v))
    total = 0.5 * (ku + pu) + 0.5 * (kv + pv) - qu - qv - coupling
    return EnergyBreakdown(total, ku, kv, pu, pv, qu, qv, coupling)


def energy(u: Field, v: Field, pots: PotentialSet, p: Params) -> EnergyBreakdown:
    uu, vv = _pair(u, v, pots)
    return breakdown_from_values(uu, vv, pots.total_potential("a", p.lam), pots.total_potential("b", p.lam), p, pots.grid)


def gradient(u: Field, v: Field, pots: PotentialSet, p: Params) -> tuple[Field, Field]:
    """Strong-form residual pair; it is the L2 (quadrature) representative of dJ."""
    uu, vv = _pair(u, v, pots)
    h = pots.grid.h
    gu = -laplacian_values(uu, h) + pots.total_potential("a", p.lam) * uu - p.mu1 * uu**3 - p.beta * vv * vv * uu
    gv = -laplacian_values(vv, h) + pots.total_potential("b", p.lam) * vv - p.mu2 * vv**3 - p.beta * uu * uu * vv
    return Field(pots.grid, gu), Field(pots.grid, gv)


@dataclass(frozen=True)
class SubdomainEnergy:
    I: float   # lambda-free energy on the bare well
    E: float   # lambda-dependent energy on the enlarged well


def subdomain_energy(w: Field, well_index: int, side: str, pots: PotentialSet, p: Params) -> SubdomainEnergy:
    if not isinstance(w, Field):
        raise TypeError("expected a Field")
    pots.check_grid(w.grid)
    wells = pots.geometry.wells(side)
    if not 0 <= int(well_index) < len(wells):
        raise IndexError(f"well index {well_index} out of range for side {side!r} ({len(wells)} wells)")
    masks = well_masks(pots.geometry, pots.grid, side)
    grid = pots.grid
    x = w.values
    wts = grid.weights()
    mu = p.mu(side)

    def piece(mask, V):
        kin = grad_sq_values(x, grid.h, mask)
        pot = float(np.sum(np.where(mask, wts * V * x * x, 0.0)))
        quart = float(np.sum(np.where(mask, wts * x**4, 0.0)))
        return 0.5 * (kin + pot) - 0.25 * mu * quart

    I = piece(masks["closed"][well_index], pots.weight(side))
    E = piece(masks["enlarged"][well_index], pots.total_potential(side, p.lam))
    return SubdomainEnergy(I, E)


@dataclass(frozen=True)
class Diagnostics:
    tail_a: float
    tail_b: float
    tail_bare_a: float
    tail_bare_b: float
    well_energy_a: tuple
    well_energy_b: tuple
    mass_a: tuple          # integral of u^2 over each enlarged a-well
    mass_b: tuple
    overlap: float
    boundary_trace: float
    extra: dict = field(default_factory=dict)


def _h1_outside(x, mask, grid) -> float:
    return grad_sq_values(x, grid.h, mask) + float(np.sum(np.where(mask, grid.weights() * x * x, 0.0)))


def diagnostics(u: Field, v: Field, pots: PotentialSet, p: Params, selection=None) -> Diagnostics:
    """Tail energies, per-well energies and masses, and the coupling overlap.

    ``tail_*`` integrate |grad|^2 + field^2 outside the selected enlarged wells
    (all wells when ``selection`` is None); ``tail_bare_*`` use the bare wells.
    """
    uu, vv = _pair(u, v, pots)
    grid = pots.grid
    rm = region_masks(pots, selection, require_nonempty=False)
    wts = grid.weights()
    bare_a = np.logical_or.reduce([rm.bare_a[i] for i in rm.J_a]) if rm.J_a else np.zeros(grid.shape, bool)
    bare_b = np.logical_or.reduce([rm.bare_b[j] for j in rm.J_b]) if rm.J_b else np.zeros(grid.shape, bool)

    def well_e(x, closed, w0):
        return tuple(grad_sq_values(x, grid.h, m) + float(np.sum(np.where(m, wts * w0 * x * x, 0.0))) for m in closed)

    def mass(x, enl):
        return tuple(float(np.sum(np.where(m, wts * x * x, 0.0))) for m in enl)

    shell = np.zeros(grid.shape, dtype=bool)
    k = max(1, grid.n // 20)
    for ax in range(grid.dim):
        idx = [slice(None)] * grid.dim
        idx[ax] = slice(0, k)
        shell[tuple(idx)] = True
        idx[ax] = slice(grid.n - k, None)
        shell[tuple(idx)] = True
    trace = float(np.sum(np.where(shell, wts * (uu * uu + vv * vv), 0.0)))

    return Diagnostics(
        tail_a=_h1_outside(uu, rm.complement_a, grid),
        tail_b=_h1_outside(vv, rm.complement_b, grid),
        tail_bare_a=_h1_outside(uu, ~bare_a, grid),
        tail_bare_b=_h1_outside(vv, ~bare_b, grid),
        well_energy_a=well_e(uu, rm.bare_a, pots.weight("a")),
        well_energy_b=well_e(vv, rm.bare_b, pots.weight("b")),
        mass_a=mass(uu, rm.wells_a),
        mass_b=mass(vv, rm.wells_b),
        overlap=p.beta**2 * float(np.sum(wts * uu * uu * vv * vv)),
        boundary_trace=trace,
    )


def eps_overlap_fraction(u: Field, v: Field, rel_eps: float = 1e-3) -> dict:
    """Volume of {u > eps_u} and {v > eps_v} and its share of the smaller support."""
    if u.grid != v.grid:
        raise GridMismatchError("u and v on different grids")
    wts = u.grid.weights()
    su = u.values > rel_eps * max(float(u.values.max()), 0.0)
    sv = v.values > rel_eps * max(float(v.values.max()), 0.0)
    vol_u = float(np.sum(wts[su]))
    vol_v = float(np.sum(wts[sv]))
    both = float(np.sum(wts[su & sv]))
    frac = both / min(vol_u, vol_v) if min(vol_u, vol_v) > 0 else 0.0
    return {"volume": both, "support_u": vol_u, "support_v": vol_v, "fraction": frac}
