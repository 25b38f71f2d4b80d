"""Steep-well potentials (a, b, a0, b0) built from box/ball wells, plus coercivity.

a(x) = a_inf * clamp(dist(x, Omega_a) / ramp_width, 0, 1)**2 vanishes exactly on
the closed wells and reaches the plateau a_inf one ramp width away.  Each well
also has an enlarged copy (dilated by ``margin``); enlarged wells must be
pairwise disjoint, across both components.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .eigen import smallest_eigenvalue
from .errors import ConditionD5Error, GeometryError, GridMismatchError
from .grid import Field, Grid, stiffness_matrix


@dataclass(frozen=True)
class Well:
    """Axis-aligned box (``half_widths``) or ball (``radius``)."""

    center: tuple
    half_widths: tuple | None = None
    radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if (self.half_widths is None) == (self.radius is None):
            raise GeometryError("a well needs exactly one of half_widths or radius")
        if self.half_widths is not None:
            hw = tuple(float(x) for x in np.broadcast_to(self.half_widths, (len(self.center),)))
            if min(hw) <= 0:
                raise GeometryError("half widths must be positive")
            object.__setattr__(self, "half_widths", hw)
        elif self.radius <= 0:
            raise GeometryError("radius must be positive")

    @property
    def shape(self) -> str:
        return "box" if self.half_widths is not None else "ball"

    @property
    def extent(self) -> np.ndarray:
        """Half-size of the bounding box, per axis."""
        if self.half_widths is not None:
            return np.array(self.half_widths)
        return np.full(len(self.center), self.radius)

    @property
    def diameter(self) -> float:
        return float(2 * self.extent.max())

    def volume(self, margin: float = 0.0) -> float:
        """Volume of the well dilated by ``margin`` (Steiner formula for boxes)."""
        d = len(self.center)
        if self.shape == "ball":
            r = self.radius + margin
            return {1: 2 * r, 2: np.pi * r * r, 3: 4.0 / 3.0 * np.pi * r**3}[d]
        sides = 2 * np.array(self.half_widths)
        if margin == 0:
            return float(np.prod(sides))
        if d == 1:
            return float(sides[0] + 2 * margin)
        if d == 2:
            return float(np.prod(sides) + 2 * margin * sides.sum() + np.pi * margin**2)
        s = sides
        return float(
            np.prod(s) + 2 * margin * (s[0] * s[1] + s[1] * s[2] + s[0] * s[2])
            + np.pi * margin**2 * s.sum() + 4.0 / 3.0 * np.pi * margin**3
        )

    def distance(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        """Euclidean distance from each node to the closed well (0 inside)."""
        if self.shape == "box":
            sq = sum(np.maximum(np.abs(x - c) - hw, 0.0) ** 2
                     for x, c, hw in zip(coords, self.center, self.half_widths))
            return np.sqrt(sq)
        r = np.sqrt(sum((x - c) ** 2 for x, c in zip(coords, self.center)))
        return np.maximum(r - self.radius, 0.0)

    def interior(self, coords: Sequence[np.ndarray], tol: float) -> np.ndarray:
        """Nodes strictly inside the well (the free nodes of H_0^1(well))."""
        if self.shape == "box":
            m = np.ones(coords[0].shape, dtype=bool)
            for x, c, hw in zip(coords, self.center, self.half_widths):
                m &= np.abs(x - c) < hw - tol
            return m
        r = np.sqrt(sum((x - c) ** 2 for x, c in zip(coords, self.center)))
        return r < self.radius - tol

    def gap(self, other: "Well") -> float:
        """Distance between the two closed wells."""
        if self.shape == "box" and other.shape == "box":
            d = np.maximum(np.abs(np.subtract(self.center, other.center)) - self.extent - other.extent, 0)
            return float(np.linalg.norm(d))
        if self.shape == "ball" and other.shape == "ball":
            return max(float(np.linalg.norm(np.subtract(self.center, other.center))) - self.radius - other.radius, 0.0)
        box, ball = (self, other) if self.shape == "box" else (other, self)
        pt = [np.array([c]) for c in ball.center]
        return max(float(box.distance(pt)[0]) - ball.radius, 0.0)


@dataclass(frozen=True)
class WellGeometry:
    wells_a: tuple
    wells_b: tuple
    margin: float

    def __post_init__(self):
        object.__setattr__(self, "wells_a", tuple(self.wells_a))
        object.__setattr__(self, "wells_b", tuple(self.wells_b))
        if not self.wells_a or not self.wells_b:
            raise GeometryError("each component needs at least one well")
        if not self.margin > 0:
            raise GeometryError("margin must be positive")

    @property
    def n_a(self) -> int:
        return len(self.wells_a)

    @property
    def n_b(self) -> int:
        return len(self.wells_b)

    def wells(self, side: str) -> tuple:
        if side not in ("a", "b"):
            raise ValueError(f"side must be 'a' or 'b', got {side!r}")
        return self.wells_a if side == "a" else self.wells_b

    def validate(self, grid: Grid) -> None:
        """Raise GeometryError unless enlarged wells are disjoint and inside the box."""
        tagged = [("a", i, w) for i, w in enumerate(self.wells_a)] + [("b", j, w) for j, w in enumerate(self.wells_b)]
        for (s1, i1, w1), (s2, i2, w2) in itertools.combinations(tagged, 2):
            if len(w1.center) != grid.dim or len(w2.center) != grid.dim:
                raise GeometryError("well dimension does not match grid")
            if w1.gap(w2) <= 2 * self.margin:
                raise GeometryError(f"enlarged wells {s1}{i1} and {s2}{i2} overlap (gap {w1.gap(w2):.4g} <= 2*margin)")
        lo = np.array(grid.center) - grid.L
        hi = np.array(grid.center) + grid.L
        for s, i, w in tagged:
            if len(w.center) != grid.dim:
                raise GeometryError("well dimension does not match grid")
            ext = w.extent + self.margin
            c = np.array(w.center)
            if np.any(c - ext <= lo) or np.any(c + ext >= hi):
                raise GeometryError(f"enlarged well {s}{i} touches the box boundary")
            room = float(min((c - w.extent - lo).min(), (hi - c - w.extent).min()))
            if room < 5 * w.diameter:
                warnings.warn(
                    f"well {s}{i} is {room:.3g} from the box boundary (< 5 diameters); "
                    "check the boundary-trace diagnostic",
                    stacklevel=2,
                )


def sample_expression(expr, grid: Grid) -> np.ndarray:
    """Sample a0/b0: number, callable(*coords), ndarray, or numpy expression string.

    Strings may use ``x, y, z, r`` and numpy functions (``sin``, ``exp``...).
    """
    coords = grid.coords()
    if callable(expr):
        vals = expr(*coords)
    elif isinstance(expr, str):
        names = {k: getattr(np, k) for k in ("sin", "cos", "exp", "tanh", "cosh", "sqrt", "abs", "pi", "minimum", "maximum", "where")}
        names["np"] = np
        for k, axis in zip("xyz", coords):
            names[k] = axis
        names["r"] = np.sqrt(sum(c * c for c in coords))
        with np.errstate(all="ignore"):
            vals = eval(expr, {"__builtins__": {}}, names)  # noqa: S307 - trusted config input
    else:
        vals = expr
    vals = np.broadcast_to(np.asarray(vals, dtype=float), grid.shape).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("potential expression produced non-finite values")
    return vals


@dataclass(frozen=True)
class PotentialSpec:
    a_inf: float
    b_inf: float
    ramp_width: float
    a0: object = 1.0
    b0: object = 1.0


@dataclass(frozen=True, eq=False)
class PotentialSet:
    grid: Grid
    a: Field
    b: Field
    a0: Field
    b0: Field
    geometry: WellGeometry
    a_inf: float
    b_inf: float
    ramp_width: float
    nu_a_wells: tuple = field(default=())
    nu_b_wells: tuple = field(default=())

    @property
    def nu_a(self) -> float:
        return min(self.nu_a_wells)

    @property
    def nu_b(self) -> float:
        return min(self.nu_b_wells)

    def steep(self, side: str) -> np.ndarray:
        return (self.a if side == "a" else self.b).values

    def weight(self, side: str) -> np.ndarray:
        return (self.a0 if side == "a" else self.b0).values

    def total_potential(self, side: str, lam: float) -> np.ndarray:
        """lam * a + a0 (or the b counterpart) on every node."""
        return lam * self.steep(side) + self.weight(side)

    def bounds(self) -> dict:
        """Sup/inf of a0, b0: bounded weights make the growth condition at infinity trivial."""
        return {
            "a0_min": float(self.a0.values.min()), "a0_max": float(self.a0.values.max()),
            "b0_min": float(self.b0.values.min()), "b0_max": float(self.b0.values.max()),
        }

    def check_grid(self, grid: Grid) -> None:
        if grid != self.grid:
            raise GridMismatchError("fields and potentials live on different grids")


def _tol(grid: Grid) -> float:
    return 1e-9 * grid.h


def well_masks(geometry: WellGeometry, grid: Grid, side: str) -> dict:
    """Per-well node masks: closed well, strict interior, enlarged well."""
    coords = grid.coords()
    tol = _tol(grid)
    inside = grid.interior_mask()
    out = {"closed": [], "interior": [], "enlarged": []}
    for w in geometry.wells(side):
        d = w.distance(coords)
        out["closed"].append(d <= tol)
        out["interior"].append(w.interior(coords, tol) & inside)
        out["enlarged"].append((d < geometry.margin - tol) & inside)
    return out


def dirichlet_eigenvalue(grid: Grid, V: np.ndarray, free: np.ndarray, tol: float = 1e-8) -> float:
    """Lowest eigenvalue of -Laplacian + V with zero data off ``free``."""
    free = np.asarray(free, dtype=bool)
    if not free.any():
        raise GeometryError("region contains no interior grid nodes")
    K = stiffness_matrix(grid, free)
    val, _, _ = smallest_eigenvalue(K, V[free], tol=tol)
    return val


def build_potentials(geometry: WellGeometry, spec: PotentialSpec, grid: Grid) -> PotentialSet:
    if not spec.a_inf > 0 or not spec.b_inf > 0:
        raise ValueError("plateau values a_inf, b_inf must be positive")
    if not 0 < spec.ramp_width <= geometry.margin:
        raise GeometryError("ramp_width must lie in (0, margin]")
    geometry.validate(grid)
    coords = grid.coords()
    tol = _tol(grid)

    def steep(wells, plateau):
        d = np.min([w.distance(coords) for w in wells], axis=0)
        d = np.where(d <= tol, 0.0, d)
        return plateau * np.clip(d / spec.ramp_width, 0.0, 1.0) ** 2

    a = steep(geometry.wells_a, spec.a_inf)
    b = steep(geometry.wells_b, spec.b_inf)
    a0 = sample_expression(spec.a0, grid)
    b0 = sample_expression(spec.b0, grid)

    nus = {}
    for side, w0 in (("a", a0), ("b", b0)):
        vals = []
        for k, free in enumerate(well_masks(geometry, grid, side)["interior"]):
            nu = dirichlet_eigenvalue(grid, w0, free)
            if not nu > 0:
                raise ConditionD5Error(f"lowest eigenvalue of -Laplacian + {side}0 on well {side}{k} is {nu:.6g} <= 0")
            vals.append(nu)
        nus[side] = tuple(vals)

    mk = lambda v: Field(grid, v, enforce_dirichlet=False)  # noqa: E731
    return PotentialSet(
        grid=grid, a=mk(a), b=mk(b), a0=mk(a0), b0=mk(b0), geometry=geometry,
        a_inf=spec.a_inf, b_inf=spec.b_inf, ramp_width=spec.ramp_width,
        nu_a_wells=nus["a"], nu_b_wells=nus["b"],
    )


@dataclass(frozen=True)
class CoercivityEstimate:
    lam: float
    nu_a: float
    nu_b: float
    C_a: float
    C_b: float

    @property
    def C_ab(self) -> float:
        return min(self.C_a, self.C_b)


def coercivity(pots: PotentialSet, lam: float, tol: float = 1e-8) -> CoercivityEstimate:
    """Smallest Rayleigh quotients of -Laplacian + lam*a + a0 (and b) on the whole box."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    grid = pots.grid
    free = grid.interior_mask()
    K = stiffness_matrix(grid, free)
    C = {}
    for side in ("a", "b"):
        V = pots.total_potential(side, lam)[free]
        C[side], _, _ = smallest_eigenvalue(K, V, tol=tol)
    return CoercivityEstimate(lam=lam, nu_a=pots.nu_a, nu_b=pots.nu_b, C_a=C["a"], C_b=C["b"])


@dataclass(frozen=True, eq=False)
class RegionMasks:
    wells_a: list          # enlarged well masks, one per a-well
    wells_b: list
    bare_a: list           # closed well masks
    bare_b: list
    interior_a: list       # strict well interiors (Dirichlet free nodes)
    interior_b: list
    selected_a: np.ndarray  # union of the selected enlarged a-wells
    selected_b: np.ndarray
    complement_a: np.ndarray
    complement_b: np.ndarray
    J_a: tuple
    J_b: tuple


def region_masks(pots: PotentialSet, selection=None, *, require_nonempty: bool = True) -> RegionMasks:
    """Node masks for every well and for the union of the selected enlarged wells.

    ``selection`` is ``(J_a, J_b)`` with 0-based well indices; ``None`` selects all.
    """
    geom = pots.geometry
    if selection is None:
        J_a, J_b = tuple(range(geom.n_a)), tuple(range(geom.n_b))
    else:
        J_a, J_b = (tuple(sorted(set(int(i) for i in J))) for J in selection)
    if require_nonempty and (not J_a or not J_b):
        raise ValueError("selection must be nonempty on both sides")
    for J, n, s in ((J_a, geom.n_a, "a"), (J_b, geom.n_b, "b")):
        if any(i < 0 or i >= n for i in J):
            raise ValueError(f"selection for {s} out of range 0..{n - 1}: {J}")
    ma = well_masks(geom, pots.grid, "a")
    mb = well_masks(geom, pots.grid, "b")
    empty = np.zeros(pots.grid.shape, dtype=bool)
    sel_a = np.logical_or.reduce([ma["enlarged"][i] for i in J_a]) if J_a else empty.copy()
    sel_b = np.logical_or.reduce([mb["enlarged"][j] for j in J_b]) if J_b else empty.copy()
    return RegionMasks(
        wells_a=ma["enlarged"], wells_b=mb["enlarged"], bare_a=ma["closed"], bare_b=mb["closed"],
        interior_a=ma["interior"], interior_b=mb["interior"],
        selected_a=sel_a, selected_b=sel_b, complement_a=~sel_a, complement_b=~sel_b, J_a=J_a, J_b=J_b,
    )
