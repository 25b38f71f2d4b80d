"""Minimisation engines for scalar, ground-state and multi-bump problems.

All three share one loop: a preconditioned gradient step, truncation of
negative parts, a re-projection that removes the unbounded scaling directions,
and Armijo backtracking on the re-projected objective.

* scalar:    one component on a well, rescaled onto its Nehari manifold;
* ground:    both components on the whole box, closed-form (t, s) projection;
* multibump: penalised energy, with every selected well piece rescaled to the
  maximum of its own fibering polynomial (the pieces do not interact).

Work happens on flat vectors over the "free" nodes (Dirichlet interior of the
region).  Interior trapezoid weights are all h^dim, so integrals reduce to
``hd * sum(...)`` and the kinetic energy is ``hd * x @ K @ x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (CertificationFailed, InitialNotAdmissible, NonConvergence, NotInAdmissibleSet,
                     NumericalError, SandwichViolation)
from .functionals import Diagnostics, EnergyBreakdown, Params, diagnostics, energy, gradient
from .grid import Field, stiffness_matrix
from .nehari import FiberingCoefficients, Projection, project_coeffs, scalar_t, strict_gap
from .penalty import (Certification, PenaltyParams, certify, clamp, energy_star, f_cut, F_cut, G_cut,
                      gradient_star, make_penalty)
from .potentials import PotentialSet, well_masks


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 20000
    step_rule: str = "backtracking"     # or "fixed"
    step_size: float = 1.0
    step_max: float = 1.0
    armijo: float = 1e-4
    grad_tol: float | None = None       # absolute; default 1e-8 * energy scale
    grad_tol_rel: float = 1e-8
    energy_slack: float = 1e-13
    init: dict | None = None            # see make_initial
    seed: int = 0
    perturb: float = 0.0
    check_sandwich: bool = True
    sandwich_slack: float = 1e-6
    precond_refresh: int = 10           # rebuild the coupling-aware preconditioner every k steps

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.precond_refresh < 0:
            raise ValueError("precond_refresh must be >= 0")
        if self.step_rule not in ("backtracking", "fixed"):
            raise ValueError("step_rule must be 'backtracking' or 'fixed'")
        for name in ("step_size", "step_max", "armijo", "grad_tol_rel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> "SolveConfig":
        d = dict(d or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown solver options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class DescentOutcome:
    x: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    history: list


class _Problem:
    """Objective, gradient, retraction and preconditioner on a free-node vector."""

    def objective(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def grad(self, x):  # pragma: no cover
        raise NotImplementedError

    def retract(self, x):  # pragma: no cover
        raise NotImplementedError

    def precondition(self, g):  # pragma: no cover
        raise NotImplementedError

    def refresh(self, x):
        """Rebuild the preconditioner around the current iterate (optional)."""


class _PairPreconditioner:
    """Block preconditioner (K + V+ + 1 + |beta| * coupling)^-1 for a field pair.

    The coupling part is the diagonal of the interaction Hessian at the
    current iterate; without it strong repulsion makes the descent crawl.
    """

    def _init_precond(self, K, Va, Vb):
        self._K, self._Va, self._Vb = K, Va, Vb
        self._sa = _factor(K, Va)
        self._sb = _factor(K, Vb)

    def coupling_diag(self, u, v):
        return v * v, u * u

    def refresh(self, x):
        if self.p.beta == 0:
            return
        u, v = self.split(x)
        cu, cv = self.coupling_diag(u, v)
        b = abs(self.p.beta)
        self._sa = _factor(self._K, np.maximum(self._Va, 0.0) + b * cu)
        self._sb = _factor(self._K, np.maximum(self._Vb, 0.0) + b * cv)

    def precondition(self, g):
        gu, gv = self.split(g)
        return np.concatenate([self._sa(gu), self._sb(gv)])


def _descend(prob: _Problem, x0: np.ndarray, cfg: SolveConfig, hd: float, tol: float | None = None) -> DescentOutcome:
    x = prob.retract(x0)
    E = prob.objective(x)
    g = prob.grad(x)
    res = float(np.max(np.abs(g)))
    if tol is None:
        tol = cfg.grad_tol if cfg.grad_tol is not None else cfg.grad_tol_rel * max(1.0, abs(E))
    history = [E]
    tau = cfg.step_size
    it = 0
    while res > tol and it < cfg.max_iters:
        if cfg.precond_refresh > 0 and it % cfg.precond_refresh == 0:
            prob.refresh(x)
        it += 1
        d = -prob.precondition(g)
        slope = hd * float(g @ d)
        if cfg.step_rule == "fixed":
            y = prob.retract(x + tau * d)
            Ey = prob.objective(y)
        else:
            first = True
            while True:
                try:
                    y = prob.retract(x + tau * d)
                    Ey = prob.objective(y)
                except NumericalError:
                    Ey = math.inf
                if math.isfinite(Ey) and Ey <= E + cfg.armijo * tau * slope + cfg.energy_slack * abs(E):
                    break
                first = False
                tau *= 0.5
                if tau < 1e-14:
                    return DescentOutcome(x, E, res, it, False, history)
            if first:
                tau = min(2.0 * tau, cfg.step_max)
        x, E = y, Ey
        g = prob.grad(x)
        res = float(np.max(np.abs(g)))
        history.append(E)
    return DescentOutcome(x, E, res, it, res <= tol, history)


def _factor(K, V):
    M = (K + sp.diags(np.maximum(V, 0.0) + 1.0)).tocsc()
    return spla.factorized(M)


class _ScalarProblem(_Problem):
    def __init__(self, K, V, mu, hd):
        self.K, self.V, self.mu, self.hd = K, V, mu, hd
        self._solve = _factor(K, V)

    def quad(self, x):
        return self.hd * float(x @ (self.K @ x) + np.sum(self.V * x * x))

    def objective(self, x):
        return 0.5 * self.quad(x) - 0.25 * self.mu * self.hd * float(np.sum(x**4))

    def grad(self, x):
        return self.K @ x + self.V * x - self.mu * x**3

    def retract(self, x):
        x = np.maximum(x, 0.0)
        return scalar_t(self.quad(x), self.mu * self.hd * float(np.sum(x**4))) * x

    def precondition(self, g):
        return self._solve(g)


class _GroundProblem(_PairPreconditioner, _Problem):
    def __init__(self, K, Va, Vb, p: Params, hd, m):
        self.K, self.Va, self.Vb, self.p, self.hd, self.m = K, Va, Vb, p, hd, m
        self._init_precond(K, Va, Vb)
        self.last_projection: Projection | None = None

    def split(self, x):
        return x[: self.m], x[self.m:]

    def coeffs(self, u, v) -> FiberingCoefficients:
        hd, p = self.hd, self.p
        return FiberingCoefficients(
            A=hd * float(u @ (self.K @ u) + np.sum(self.Va * u * u)),
            B=hd * float(v @ (self.K @ v) + np.sum(self.Vb * v * v)),
            P=p.mu1 * hd * float(np.sum(u**4)),
            Q=p.mu2 * hd * float(np.sum(v**4)),
            R=p.beta * hd * float(np.sum(u * u * v * v)),
        )

    def objective(self, x):
        u, v = self.split(x)
        return float(self.coeffs(u, v).T(1.0, 1.0))

    def grad(self, x):
        u, v = self.split(x)
        p = self.p
        gu = self.K @ u + self.Va * u - p.mu1 * u**3 - p.beta * v * v * u
        gv = self.K @ v + self.Vb * v - p.mu2 * v**3 - p.beta * u * u * v
        return np.concatenate([gu, gv])

    def retract(self, x):
        u, v = self.split(np.maximum(x, 0.0))
        pr = project_coeffs(self.coeffs(u, v))
        self.last_projection = pr
        return np.concatenate([pr.t * u, pr.s * v])



class _MultibumpProblem(_PairPreconditioner, _Problem):
    def __init__(self, K, Va, Vb, p: Params, hd, m, sel_a, sel_b, pieces_a, pieces_b, delta):
        self.K, self.Va, self.Vb, self.p, self.hd, self.m = K, Va, Vb, p, hd, m
        self.sel_a, self.sel_b = sel_a, sel_b
        self.region = sel_a | sel_b
        self.pieces_a, self.pieces_b = pieces_a, pieces_b
        self.delta = delta
        self._init_precond(K, Va, Vb)

    def coupling_diag(self, u, v):
        dl = self.delta
        return (np.where(self.region, v * v, 2.0 * G_cut(v, dl)),
                np.where(self.region, u * u, 2.0 * G_cut(u, dl)))

    def split(self, x):
        return x[: self.m], x[self.m:]

    def objective(self, x):
        u, v = self.split(x)
        p, hd, dl = self.p, self.hd, self.delta
        up, vp = np.maximum(u, 0), np.maximum(v, 0)
        Fa = np.where(self.sel_a, 0.25 * up**4, F_cut(u, dl))
        Fb = np.where(self.sel_b, 0.25 * vp**4, F_cut(v, dl))
        H = np.where(self.region, 0.5 * up * up * vp * vp, 2.0 * G_cut(u, dl) * G_cut(v, dl))
        quad = float(u @ (self.K @ u) + np.sum(self.Va * u * u) + v @ (self.K @ v) + np.sum(self.Vb * v * v))
        return hd * (0.5 * quad - p.mu1 * float(np.sum(Fa)) - p.mu2 * float(np.sum(Fb)) - p.beta * float(np.sum(H)))

    def grad(self, x):
        u, v = self.split(x)
        p, dl = self.p, self.delta
        up, vp = np.maximum(u, 0), np.maximum(v, 0)
        fa = np.where(self.sel_a, up**3, f_cut(u, dl))
        fb = np.where(self.sel_b, vp**3, f_cut(v, dl))
        Hu = np.where(self.region, up * vp * vp, 2.0 * clamp(u, dl) * G_cut(v, dl))
        Hv = np.where(self.region, vp * up * up, 2.0 * clamp(v, dl) * G_cut(u, dl))
        gu = self.K @ u + self.Va * u - p.mu1 * fa - p.beta * Hu
        gv = self.K @ v + self.Vb * v - p.mu2 * fb - p.beta * Hv
        return np.concatenate([gu, gv])

    def _rescale(self, x, other, V, mu, pieces):
        x = x.copy()
        for M in pieces:
            y = np.where(M, x, 0.0)
            c4 = mu * float(np.sum(y**4))
            if c4 <= 0:
                continue
            Ky = self.K @ y
            c2 = float(y @ Ky) + float(np.sum(V[M] * y[M] ** 2)) - self.p.beta * float(np.sum(y[M] ** 2 * other[M] ** 2))
            c1 = float(Ky @ (x - y))
            if not (math.isfinite(c4) and math.isfinite(c2) and math.isfinite(c1)):
                raise NumericalError("non-finite fibering coefficients in well rescale")
            roots = np.roots([c4, 0.0, -c2, -c1])
            real = roots[np.abs(roots.imag) <= 1e-10 * np.abs(roots).max()].real
            real = real[real > 0]
            if real.size:
                x[M] *= real.max()
            elif c2 > 0:
                # strong negative coupling to the field just outside the well: fall back
                # to the piece-only scaling so the uncut quartic stays controlled
                x[M] *= math.sqrt(c2 / c4)
            else:
                raise NumericalError("well piece has no positive fibering maximum")
        return x

    def retract(self, x):
        u, v = self.split(np.maximum(x, 0.0))
        u = self._rescale(u, v, self.Va, self.p.mu1, self.pieces_a)
        v = self._rescale(v, u, self.Vb, self.p.mu2, self.pieces_b)
        return np.concatenate([u, v])


# ----------------------------------------------------------------- initial data

def _bump(grid, well):
    """Smooth nonnegative bump vanishing on the boundary of ``well``."""
    coords = grid.coords()
    if well.shape == "box":
        out = np.ones(grid.shape)
        for x, c, hw in zip(coords, well.center, well.half_widths):
            out *= np.where(np.abs(x - c) < hw, np.cos(0.5 * np.pi * (x - c) / hw), 0.0)
        return out
    r2 = sum((x - c) ** 2 for x, c in zip(coords, well.center))
    return np.maximum(1.0 - r2 / well.radius**2, 0.0) ** 2


def gaussian_field(grid, specs) -> np.ndarray:
    coords = grid.coords()
    out = np.zeros(grid.shape)
    for s in specs:
        c = np.broadcast_to(np.asarray(s["center"], dtype=float), (grid.dim,))
        r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
        out += float(s.get("amplitude", 1.0)) * np.exp(-r2 / (2.0 * float(s.get("width", 1.0)) ** 2))
    return out


def _perturb(vals, cfg: SolveConfig, grid, salt: int):
    if cfg.perturb <= 0:
        return vals
    rng = np.random.default_rng([cfg.seed, salt])
    return vals * (1.0 + cfg.perturb * rng.standard_normal(vals.shape))


# -------------------------------------------------------------------- scalar

@dataclass(frozen=True, eq=False)
class ReferenceGroundState:
    side: str
    well: int
    W: Field
    m: float
    R_scale: float
    residual: float
    iterations: int
    m_lam: float | None = None
    W_lam: Field | None = None
    history: tuple = ()


def _scalar_solve(grid, free, V, mu, init_vals, cfg, neumann=False) -> tuple[np.ndarray, DescentOutcome]:
    K = stiffness_matrix(grid, free, edge_mask=free if neumann else None)
    prob = _ScalarProblem(K, V[free], mu, grid.cell_volume)
    x0 = init_vals[free]
    if not np.any(x0 > 0):
        x0 = np.ones_like(x0)
    out = _descend(prob, x0, cfg, grid.cell_volume)
    full = np.zeros(grid.shape)
    full[free] = out.x
    return full, out


def reference_scale(m: float) -> float:
    """Amplification R with I(R W) <= 0 and R^4 mu |W|_4^4 >= 8 m (Nehari W needs R >= 2^(1/2))."""
    return 2.02 if m > 0 else float("nan")


def solve_scalar(well: int, side: str, pots: PotentialSet, p: Params, cfg: SolveConfig | None = None,
                 *, with_lambda: bool = False) -> ReferenceGroundState:
    """Least-energy bump of -Laplacian + side0 = mu w^3 on one bare well (zero outside).

    With ``with_lambda`` the lambda-dependent problem on the enlarged well
    (natural boundary on its rim, potential lam*a + a0) is solved as well.
    """
    cfg = cfg or SolveConfig()
    wells = pots.geometry.wells(side)
    if not 0 <= well < len(wells):
        raise IndexError(f"no well {well} on side {side!r}")
    grid = pots.grid
    masks = well_masks(pots.geometry, grid, side)
    mu = p.mu(side)
    seed = _perturb(_bump(grid, wells[well]), cfg, grid, 17 + well)
    full, out = _scalar_solve(grid, masks["interior"][well], pots.weight(side), mu, seed, cfg)
    if not out.converged:
        raise NonConvergence(f"scalar solve on {side}{well} stalled (residual {out.residual:.3g})",
                             residual=out.residual, history=out.history)
    m = out.objective
    W = Field(grid, full)
    m_lam = W_lam = None
    if with_lambda:
        enl = masks["enlarged"][well]
        full2, out2 = _scalar_solve(grid, enl, pots.total_potential(side, p.lam), mu, full, cfg, neumann=True)
        if not out2.converged:
            raise NonConvergence(f"lambda scalar solve on {side}{well} stalled (residual {out2.residual:.3g})",
                                 residual=out2.residual, history=out2.history)
        m_lam = out2.objective
        if m_lam > m * (1 + 1e-8) + 1e-12:
            raise NumericalError(f"m_lambda={m_lam:.12g} exceeds m={m:.12g} on {side}{well}")
        W_lam = Field(grid, full2, enforce_dirichlet=True)
    return ReferenceGroundState(side, well, W, m, reference_scale(m), out.residual, out.iterations,
                                m_lam, W_lam, tuple(out.history))


def solve_scalar_box(side: str, pots: PotentialSet, p: Params, cfg: SolveConfig | None = None,
                     seeds: list | None = None) -> tuple[float, Field]:
    """Least energy of the one-component problem with lam*a + a0 on the whole box.

    Descends from one seed per well (or from ``seeds``) and keeps the lowest.
    """
    cfg = cfg or SolveConfig()
    grid = pots.grid
    free = grid.interior_mask()
    if seeds is None:
        seeds = [_bump(grid, w) for w in pots.geometry.wells(side)]
    best = None
    for k, s in enumerate(seeds):
        full, out = _scalar_solve(grid, free, pots.total_potential(side, p.lam), p.mu(side), np.asarray(s), cfg)
        if not out.converged:
            raise NonConvergence(f"box scalar solve ({side}, seed {k}) stalled (residual {out.residual:.3g})",
                                 residual=out.residual, history=out.history)
        if best is None or out.objective < best[0]:
            best = (out.objective, Field(grid, full))
    return best


@dataclass(frozen=True)
class Sandwich:
    lower: float
    upper: float
    m_a_lam: float
    m_b_lam: float
    m_a: float
    m_b: float


def sandwich_bounds(pots: PotentialSet, p: Params, cfg: SolveConfig | None = None, refs: dict | None = None) -> Sandwich:
    cfg = cfg or SolveConfig()
    if refs is None:
        refs = reference_bumps(pots, p, cfg)
    m_a = min(r.m for (s, _), r in refs.items() if s == "a")
    m_b = min(r.m for (s, _), r in refs.items() if s == "b")
    m_a_lam, _ = solve_scalar_box("a", pots, p, cfg)
    m_b_lam, _ = solve_scalar_box("b", pots, p, cfg)
    return Sandwich(m_a_lam + m_b_lam, m_a + m_b, m_a_lam, m_b_lam, m_a, m_b)


def reference_bumps(pots: PotentialSet, p: Params, cfg: SolveConfig | None = None, with_lambda=False) -> dict:
    """ReferenceGroundState for every well, keyed by (side, index)."""
    out = {}
    for side in ("a", "b"):
        for k in range(len(pots.geometry.wells(side))):
            out[(side, k)] = solve_scalar(k, side, pots, p, cfg, with_lambda=with_lambda)
    return out


# --------------------------------------------------------------- coupled solves

@dataclass(eq=False)
class SolveResult:
    mode: str
    params: Params
    u: Field
    v: Field
    energy: EnergyBreakdown
    iterations: int
    residual: float
    converged: bool
    diagnostics: Diagnostics
    D: float
    history: list
    projection: Projection | None = None
    certification: Certification | None = None
    sandwich: Sandwich | None = None
    selection: tuple | None = None
    unmodified_residual: float | None = None
    penalized_energy: EnergyBreakdown | None = None
    delta: float | None = None

    def mass_pattern(self, threshold: float = 1e-4) -> tuple:
        masses = np.array(self.diagnostics.mass_a + self.diagnostics.mass_b)
        total = masses.sum()
        return tuple(bool(m > threshold * total) for m in masses)

    def summary(self) -> dict:
        d = {
            "mode": self.mode, "lambda": self.params.lam, "beta": self.params.beta,
            "mu1": self.params.mu1, "mu2": self.params.mu2,
            "energy": self.energy.total, "iterations": self.iterations, "residual": self.residual,
            "converged": self.converged, "D": self.D, "tail_a": self.diagnostics.tail_a,
            "tail_b": self.diagnostics.tail_b, "overlap": self.diagnostics.overlap,
        }
        if self.sandwich is not None:
            d["lower"], d["upper"] = self.sandwich.lower, self.sandwich.upper
        if self.certification is not None:
            d["certified"] = self.certification.ok
            d["max_outside_a"] = self.certification.max_outside_a
            d["max_outside_b"] = self.certification.max_outside_b
            d["delta"] = self.certification.delta
        if self.selection is not None:
            d["J_a"], d["J_b"] = list(self.selection[0]), list(self.selection[1])
        if self.unmodified_residual is not None:
            d["unmodified_residual"] = self.unmodified_residual
        return d


def _initial_pair(pots, p, cfg, init, refs, wells_a, wells_b):
    grid = pots.grid
    if init is not None:
        u0, v0 = (np.asarray(f.values if isinstance(f, Field) else f, dtype=float) for f in init)
    elif cfg.init and cfg.init.get("kind") == "gaussian":
        u0 = gaussian_field(grid, cfg.init["a"])
        v0 = gaussian_field(grid, cfg.init["b"])
    else:
        u0 = sum(refs[("a", i)].W.values for i in wells_a)
        v0 = sum(refs[("b", j)].W.values for j in wells_b)
    return _perturb(u0, cfg, grid, 1), _perturb(v0, cfg, grid, 2)


def solve_ground(pots: PotentialSet, p: Params, cfg: SolveConfig | None = None, *,
                 init=None, refs: dict | None = None, sandwich: Sandwich | None = None) -> SolveResult:
    """Minimise J over the Nehari set of pairs by projected preconditioned descent."""
    cfg = cfg or SolveConfig()
    grid = pots.grid
    need_refs = cfg.check_sandwich or (init is None and not (cfg.init and cfg.init.get("kind") == "gaussian"))
    if refs is None and need_refs:
        refs = reference_bumps(pots, p, cfg)
    wa = wb = None
    if refs is not None:
        wa = [min(range(pots.geometry.n_a), key=lambda i: refs[("a", i)].m)]
        wb = [min(range(pots.geometry.n_b), key=lambda j: refs[("b", j)].m)]
    u0, v0 = _initial_pair(pots, p, cfg, init, refs, wa, wb)

    free = grid.interior_mask()
    K = stiffness_matrix(grid, free)
    m = int(free.sum())
    prob = _GroundProblem(K, pots.total_potential("a", p.lam)[free], pots.total_potential("b", p.lam)[free],
                          p, grid.cell_volume, m)
    x0 = np.concatenate([np.maximum(u0[free], 0), np.maximum(v0[free], 0)])
    try:
        prob.retract(x0)
    except NotInAdmissibleSet as exc:
        raise InitialNotAdmissible(f"initial pair not admissible: {exc}") from exc
    except ValueError as exc:
        raise InitialNotAdmissible(f"initial pair not admissible: {exc}") from exc

    out = _descend(prob, x0, cfg, grid.cell_volume)
    if not out.converged:
        raise NonConvergence(f"ground-state descent stopped at residual {out.residual:.3g} after {out.iterations} steps",
                             residual=out.residual, history=out.history)
    uf, vf = np.zeros(grid.shape), np.zeros(grid.shape)
    uf[free], vf[free] = prob.split(out.x)
    u, v = Field(grid, uf), Field(grid, vf)
    proj = project_coeffs(prob.coeffs(*prob.split(out.x)))
    e = energy(u, v, pots, p)
    res = SolveResult(
        mode="ground", params=p, u=u, v=v, energy=e, iterations=out.iterations, residual=out.residual,
        converged=True, diagnostics=diagnostics(u, v, pots, p), D=proj.D, history=out.history, projection=proj,
    )
    if cfg.check_sandwich:
        sw = sandwich if sandwich is not None else sandwich_bounds(pots, p, cfg, refs)
        res.sandwich = sw
        slack = cfg.sandwich_slack * max(1.0, abs(sw.upper))
        if not (sw.lower - slack <= e.total <= sw.upper + slack):
            raise SandwichViolation(
                f"ground energy {e.total:.10g} outside [{sw.lower:.10g}, {sw.upper:.10g}]",
                energy=e.total, lower=sw.lower, upper=sw.upper)
    return res


def solve_multibump(pots: PotentialSet, p: Params, selection, cfg: SolveConfig | None = None, *,
                    init=None, refs: dict | None = None, pen: PenaltyParams | None = None,
                    require_certified: bool = True) -> SolveResult:
    """Minimise the penalised energy from bumps seeded in the selected wells, then certify."""
    cfg = cfg or SolveConfig()
    grid = pots.grid
    if pen is None:
        pen = make_penalty(pots, p, selection)
    J_a, J_b = pen.selection
    if init is None and refs is None and not (cfg.init and cfg.init.get("kind") == "gaussian"):
        refs = {}
        for i in J_a:
            refs[("a", i)] = solve_scalar(i, "a", pots, p, cfg)
        for j in J_b:
            refs[("b", j)] = solve_scalar(j, "b", pots, p, cfg)
    u0, v0 = _initial_pair(pots, p, cfg, init, refs, J_a, J_b)

    free = grid.interior_mask()
    K = stiffness_matrix(grid, free)
    m = int(free.sum())
    prob = _MultibumpProblem(
        K, pots.total_potential("a", p.lam)[free], pots.total_potential("b", p.lam)[free], p, grid.cell_volume, m,
        pen.masks.selected_a[free], pen.masks.selected_b[free],
        [pen.masks.wells_a[i][free] for i in J_a], [pen.masks.wells_b[j][free] for j in J_b], pen.delta,
    )
    x0 = np.concatenate([np.maximum(u0[free], 0), np.maximum(v0[free], 0)])
    out = _descend(prob, x0, cfg, grid.cell_volume)
    if not out.converged:
        raise NonConvergence(f"multibump descent stopped at residual {out.residual:.3g} after {out.iterations} steps",
                             residual=out.residual, history=out.history)
    uf, vf = np.zeros(grid.shape), np.zeros(grid.shape)
    uf[free], vf[free] = prob.split(out.x)
    u, v = Field(grid, uf), Field(grid, vf)
    cert = certify(u, v, pen)
    gu, gv = gradient(u, v, pots, p)
    unmod = float(max(np.max(np.abs(gu.values)), np.max(np.abs(gv.values))))
    try:
        D = strict_gap(u, v, pots, p)
    except ValueError:
        D = float("nan")
    res = SolveResult(
        mode="multibump", params=p, u=u, v=v, energy=energy(u, v, pots, p), iterations=out.iterations,
        residual=out.residual, converged=True, diagnostics=diagnostics(u, v, pots, p, (J_a, J_b)), D=D,
        history=out.history, certification=cert, selection=(J_a, J_b), unmodified_residual=unmod,
        penalized_energy=energy_star(u, v, pots, p, pen), delta=pen.delta,
    )
    if require_certified and not cert.ok:
        raise CertificationFailed(
            f"solution exceeds delta={pen.delta:.4g} off the selected wells "
            f"(u: {cert.max_outside_a:.4g}, v: {cert.max_outside_b:.4g})",
            cert.max_outside_a, cert.max_outside_b, result=res)
    return res
