"""Fibering maps: admissibility test, closed-form two-component projection, scalar projection.

For fixed (u, v) the energy along the rays (t u, s v) is

    T(t, s) = A t^2/2 + B s^2/2 - P t^4/4 - Q s^4/4 - R t^2 s^2/2,

with A, B the weighted squared norms, P = mu1 |u|_4^4, Q = mu2 |v|_4^4 and
R = beta |u^2 v^2|_1.  Critical points solve a linear system in (t^2, s^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDiscriminant, NotInAdmissibleSet, NumericalError
from .functionals import Params, energy
from .grid import Field
from .potentials import PotentialSet

DEGENERACY_FLOOR = 1e-12
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class FiberingCoefficients:
    A: float
    B: float
    P: float
    Q: float
    R: float

    @property
    def D(self) -> float:
        return self.P * self.Q - self.R * self.R

    def T(self, t, s):
        t2 = np.asarray(t, dtype=float) ** 2
        s2 = np.asarray(s, dtype=float) ** 2
        return 0.5 * self.A * t2 + 0.5 * self.B * s2 - 0.25 * self.P * t2 * t2 - 0.25 * self.Q * s2 * s2 - 0.5 * self.R * t2 * s2

    def residuals(self, t: float, s: float) -> tuple[float, float]:
        """(T1, T2) with dT/dt = t*T1 and dT/ds = s*T2."""
        return (self.A - self.P * t * t - self.R * s * s, self.B - self.Q * s * s - self.R * t * t)


@dataclass(frozen=True)
class Projection:
    t: float
    s: float
    energy: float
    D: float
    T1: float
    T2: float
    hessian_tt: float
    hessian_det: float

    @property
    def is_local_max(self) -> bool:
        return self.hessian_tt < 0 and self.hessian_det > 0


def fibering_coeffs(u: Field, v: Field, pots: PotentialSet, p: Params) -> FiberingCoefficients:
    e = energy(u, v, pots, p)
    if not np.any(u.values) or not np.any(v.values):
        raise ValueError("fibering coefficients need two nonzero fields")
    return FiberingCoefficients(
        A=e.norm_a_lambda_sq, B=e.norm_b_lambda_sq,
        P=4.0 * e.quartic_u, Q=4.0 * e.quartic_v, R=2.0 * e.coupling,
    )


def project_coeffs(c: FiberingCoefficients) -> Projection:
    """Closed-form maximiser of T over the open positive quadrant."""
    D = c.D
    if not D > 0:
        raise NotInAdmissibleSet(f"discriminant P*Q - R^2 = {D:.6g} <= 0")
    if D < DEGENERACY_FLOOR * c.P * c.Q:
        raise DegenerateDiscriminant(f"discriminant {D:.3g} below {DEGENERACY_FLOOR:g} * P*Q")
    t2 = (c.Q * c.A - c.R * c.B) / D
    s2 = (c.P * c.B - c.R * c.A) / D
    if not (t2 > 0 and s2 > 0):
        raise NumericalError(f"nonpositive radicand in projection (t^2={t2:.3g}, s^2={s2:.3g})")
    t, s = math.sqrt(t2), math.sqrt(s2)
    T1, T2 = c.residuals(t, s)
    # Hessian of T at a critical point, using T1 = T2 = 0.
    htt = -2.0 * c.P * t2
    hss = -2.0 * c.Q * s2
    hts = -2.0 * c.R * t * s
    return Projection(t=t, s=s, energy=float(c.T(t, s)), D=D, T1=T1, T2=T2,
                      hessian_tt=htt, hessian_det=htt * hss - hts * hts)


def project(u: Field, v: Field, pots: PotentialSet, p: Params) -> Projection:
    return project_coeffs(fibering_coeffs(u, v, pots, p))


def scalar_project(w: Field, side: str, pots: PotentialSet, p: Params) -> float:
    """t* > 0 putting t*w on the one-component Nehari manifold."""
    zero = Field.zeros(pots.grid)
    e = energy(w, zero, pots, p) if side == "a" else energy(zero, w, pots, p)
    A = e.norm_a_lambda_sq if side == "a" else e.norm_b_lambda_sq
    P = 4.0 * (e.quartic_u if side == "a" else e.quartic_v)
    return scalar_t(A, P)


def scalar_t(A: float, P: float) -> float:
    if not P > 0:
        raise ValueError("quartic norm vanishes; no Nehari projection")
    if not A > 0:
        raise NumericalError("quadratic form is not positive; increase lambda or check a0")
    return math.sqrt(A / P)


def strict_gap(u: Field, v: Field, pots: PotentialSet, p: Params) -> float:
    return fibering_coeffs(u, v, pots, p).D
