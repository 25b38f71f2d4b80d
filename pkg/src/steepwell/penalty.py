"""Penalised functional: nonlinearities cut off at amplitude delta outside the selected wells.

Inside the selected enlarged wells the problem is untouched.  Outside, the
cubic term becomes f(t) = min(t+^3, delta^2 t+) and the coupling density
becomes 2 G(u) G(v) with G' = clamp(., 0, delta).  A critical point that stays
below delta off the selected wells solves the original system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functionals import EnergyBreakdown, Params, breakdown_from_values
from .grid import Field, laplacian_values
from .potentials import PotentialSet, RegionMasks, coercivity, region_masks


def delta_beta(C_ab: float, p: Params) -> float:
    if not C_ab > 0:
        raise ValueError(f"coercivity constant must be positive, got {C_ab}")
    b = abs(p.beta)
    return math.sqrt(0.5 * C_ab * min(1.0, 1.0 / (p.mu1 + 2 * b), 1.0 / (p.mu2 + 2 * b)))


def f_cut(t, delta):
    tp = np.maximum(t, 0.0)
    return np.minimum(tp**3, delta * delta * tp)


def F_cut(t, delta):
    tp = np.maximum(t, 0.0)
    d2 = delta * delta
    return np.where(tp <= delta, 0.25 * tp**4, 0.25 * d2 * d2 + 0.5 * d2 * (tp * tp - d2))


def clamp(t, delta):
    return np.clip(t, 0.0, delta)


def h_cut(t, s, delta):
    return clamp(t, delta) * clamp(s, delta)


def G_cut(t, delta):
    tp = np.maximum(t, 0.0)
    return np.where(tp <= delta, 0.5 * tp * tp, 0.5 * delta * delta + delta * (tp - delta))


@dataclass(frozen=True, eq=False)
class PenaltyParams:
    delta: float
    C_ab: float
    masks: RegionMasks

    @property
    def selection(self) -> tuple:
        return (self.masks.J_a, self.masks.J_b)

    @property
    def coupled_region(self) -> np.ndarray:
        """Nodes where the coupling keeps its uncut form t+ s+."""
        return self.masks.selected_a | self.masks.selected_b


def make_penalty(pots: PotentialSet, p: Params, selection, C_ab: float | None = None) -> PenaltyParams:
    if C_ab is None:
        C_ab = coercivity(pots, p.lam).C_ab
    masks = region_masks(pots, selection, require_nonempty=True)
    return PenaltyParams(delta=delta_beta(C_ab, p), C_ab=C_ab, masks=masks)


def _nonlin(x, sel, delta):
    """(F, f) for one component: plain quartic on ``sel``, cut-off elsewhere."""
    xp = np.maximum(x, 0.0)
    F = np.where(sel, 0.25 * xp**4, F_cut(x, delta))
    f = np.where(sel, xp**3, f_cut(x, delta))
    return F, f


def _coupling(u, v, region, delta):
    """(H, dH/du, dH/dv) under the three-region rule."""
    up, vp = np.maximum(u, 0.0), np.maximum(v, 0.0)
    Gu, Gv = G_cut(u, delta), G_cut(v, delta)
    H = np.where(region, 0.5 * up * up * vp * vp, 2.0 * Gu * Gv)
    Hu = np.where(region, up * vp * vp, 2.0 * clamp(u, delta) * Gv)
    Hv = np.where(region, vp * up * up, 2.0 * clamp(v, delta) * Gu)
    return H, Hu, Hv


def _check(u, v, pots, pen):
    for f in (u, v):
        pots.check_grid(f.grid)
    if pen.masks.selected_a.shape != pots.grid.shape:
        raise ValueError("penalty masks do not match the grid")


def energy_star(u: Field, v: Field, pots: PotentialSet, p: Params, pen: PenaltyParams) -> EnergyBreakdown:
    _check(u, v, pots, pen)
    uu, vv = u.values, v.values
    w = pots.grid.weights()
    Fa, _ = _nonlin(uu, pen.masks.selected_a, pen.delta)
    Fb, _ = _nonlin(vv, pen.masks.selected_b, pen.delta)
    H, _, _ = _coupling(uu, vv, pen.coupled_region, pen.delta)
    return breakdown_from_values(
        uu, vv, pots.total_potential("a", p.lam), pots.total_potential("b", p.lam), p, pots.grid,
        quartic=(p.mu1 * float(np.sum(w * Fa)), p.mu2 * float(np.sum(w * Fb))),
        coupling=p.beta * float(np.sum(w * H)),
    )


def gradient_star(u: Field, v: Field, pots: PotentialSet, p: Params, pen: PenaltyParams) -> tuple[Field, Field]:
    _check(u, v, pots, pen)
    uu, vv = u.values, v.values
    h = pots.grid.h
    _, fa = _nonlin(uu, pen.masks.selected_a, pen.delta)
    _, fb = _nonlin(vv, pen.masks.selected_b, pen.delta)
    _, Hu, Hv = _coupling(uu, vv, pen.coupled_region, pen.delta)
    gu = -laplacian_values(uu, h) + pots.total_potential("a", p.lam) * uu - p.mu1 * fa - p.beta * Hu
    gv = -laplacian_values(vv, h) + pots.total_potential("b", p.lam) * vv - p.mu2 * fb - p.beta * Hv
    return Field(pots.grid, gu), Field(pots.grid, gv)


@dataclass(frozen=True)
class Certification:
    ok: bool
    max_outside_a: float
    max_outside_b: float
    delta: float


def certify(u: Field, v: Field, pen: PenaltyParams) -> Certification:
    ma = float(np.max(u.values[pen.masks.complement_a], initial=0.0))
    mb = float(np.max(v.values[pen.masks.complement_b], initial=0.0))
    ma, mb = max(ma, 0.0), max(mb, 0.0)
    return Certification(ok=bool(ma <= pen.delta and mb <= pen.delta), max_outside_a=ma, max_outside_b=mb, delta=pen.delta)


def cutoff_brackets(u: Field, v: Field, pots: PotentialSet, pen: PenaltyParams) -> dict:
    """Integrated brackets with their lower bounds.

    ``F_a``: integral of f(u) u / 4 - F(u), bounded below by -delta^2 |u+|_2^2 / 4.
    ``H``:   integral of (u H_u + v H_v)/4 - H, which lies in [-delta^2 |u+ v+|_1, 0].
    """
    _check(u, v, pots, pen)
    uu, vv = u.values, v.values
    w = pots.grid.weights()
    d2 = pen.delta**2
    out = {}
    for key, x, sel in (("F_a", uu, pen.masks.selected_a), ("F_b", vv, pen.masks.selected_b)):
        F, f = _nonlin(x, sel, pen.delta)
        xp = np.maximum(x, 0.0)
        out[key] = (float(np.sum(w * (0.25 * f * x - F))), -0.25 * d2 * float(np.sum(w * xp * xp)))
    H, Hu, Hv = _coupling(uu, vv, pen.coupled_region, pen.delta)
    bracket = float(np.sum(w * (0.25 * uu * Hu + 0.25 * vv * Hv - H)))
    l1 = float(np.sum(w * np.maximum(uu, 0) * np.maximum(vv, 0)))
    out["H"] = (bracket, -d2 * l1)
    return out
