"""Uniform Dirichlet box grids, fields, finite-difference operators and quadrature.

The box is ``center + [-L, L]^dim`` sampled with ``n`` points per axis.  Every
field vanishes on the box boundary.  The discrete gradient energy is the sum of
squared forward differences over grid edges, which is exactly the quadratic
form of the 3-point Laplacian, so

    -integrate(f * laplacian(f)) == norms(f).grad_l2sq

holds to rounding for any Dirichlet field.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatchError, InvalidFieldError


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int
    L: float
    center: tuple = field(default=None)

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 8:
            raise ValueError(f"need at least 8 points per axis, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"half-width must be positive, got {self.L}")
        c = (0.0,) * self.dim if self.center is None else tuple(float(x) for x in self.center)
        if len(c) != self.dim:
            raise ValueError("center must have one entry per axis")
        object.__setattr__(self, "center", c)

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.dim

    def axis(self, k: int = 0) -> np.ndarray:
        return self.center[k] + np.linspace(-self.L, self.L, self.n)

    def coords(self) -> list[np.ndarray]:
        """Node coordinates, one array of ``shape`` per axis (ij indexing)."""
        return np.meshgrid(*[self.axis(k) for k in range(self.dim)], indexing="ij")

    def weights(self) -> np.ndarray:
        """Tensor-product trapezoidal weights; they sum to the box volume."""
        w1 = np.full(self.n, self.h)
        w1[0] = w1[-1] = 0.5 * self.h
        w = w1
        for _ in range(self.dim - 1):
            w = np.multiply.outer(w, w1)
        return w

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        for k in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[k] = 0
            m[tuple(idx)] = True
            idx[k] = -1
            m[tuple(idx)] = True
        return m

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def header(self, name: str = "") -> dict:
        return {"dim": self.dim, "n": self.n, "L": self.L, "center": list(self.center), "name": name}


class Field:
    """Real samples of one component on a grid; immutable, zero on the boundary."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values, *, enforce_dirichlet: bool = True):
        vals = np.array(values, dtype=np.float64, copy=True)
        if vals.shape != grid.shape:
            if vals.size == grid.size:
                vals = vals.reshape(grid.shape)
            else:
                raise InvalidFieldError(f"expected shape {grid.shape}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InvalidFieldError("field contains non-finite values")
        if enforce_dirichlet:
            vals[grid.boundary_mask()] = 0.0
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, key, value):
        raise AttributeError("Field is immutable")

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "Field":
        vals = np.broadcast_to(np.asarray(fn(*grid.coords()), dtype=float), grid.shape)
        return cls(grid, vals)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __repr__(self):
        return f"Field(dim={self.grid.dim}, n={self.grid.n}, max={np.max(np.abs(self.values)):.3g})"


class Norms(NamedTuple):
    l2sq: float
    l4_4: float
    grad_l2sq: float


def as_values(f, grid: Grid | None = None) -> np.ndarray:
    """Return the ndarray behind ``f`` (Field or array), checking the grid if given."""
    if isinstance(f, Field):
        if grid is not None and f.grid != grid:
            raise GridMismatchError("field lives on a different grid")
        return f.values
    arr = np.asarray(f, dtype=np.float64)
    if grid is not None and arr.shape != grid.shape:
        raise GridMismatchError(f"expected shape {grid.shape}, got {arr.shape}")
    return arr


def _check_finite(vals: np.ndarray):
    if not np.all(np.isfinite(vals)):
        raise InvalidFieldError("field contains non-finite values")


def laplacian_values(vals: np.ndarray, h: float) -> np.ndarray:
    """3-point Laplacian per axis with zero ghosts; boundary of the result is 0."""
    out = np.zeros_like(vals)
    padded = np.pad(vals, 1)
    dim = vals.ndim
    core = tuple(slice(1, -1) for _ in range(dim))
    for k in range(dim):
        lo = list(core)
        hi = list(core)
        lo[k] = slice(0, -2)
        hi[k] = slice(2, None)
        out += padded[tuple(lo)] + padded[tuple(hi)] - 2.0 * vals
    out /= h * h
    for k in range(dim):
        idx = [slice(None)] * dim
        idx[k] = 0
        out[tuple(idx)] = 0.0
        idx[k] = -1
        out[tuple(idx)] = 0.0
    return out


def laplacian(f: Field) -> Field:
    _check_finite(f.values)
    return Field(f.grid, laplacian_values(f.values, f.grid.h))


def integrate(f, grid: Grid | None = None) -> float:
    grid = f.grid if isinstance(f, Field) else grid
    vals = as_values(f, grid)
    return float(np.sum(grid.weights() * vals))


def grad_sq_values(vals: np.ndarray, h: float, mask: np.ndarray | None = None) -> float:
    """Sum over grid edges of squared differences, times h^(dim-2).

    With ``mask`` only edges whose two endpoints are both in the mask count,
    which is the gradient energy of the restriction of the field to that set.
    """
    total = 0.0
    for k in range(vals.ndim):
        d = np.diff(vals, axis=k)
        if mask is not None:
            lo = [slice(None)] * vals.ndim
            hi = [slice(None)] * vals.ndim
            lo[k] = slice(0, -1)
            hi[k] = slice(1, None)
            d = d[mask[tuple(lo)] & mask[tuple(hi)]]
        total += float(np.sum(d * d))
    return total * h ** (vals.ndim - 2)


def norms(f: Field) -> Norms:
    w = f.grid.weights()
    v = f.values
    v2 = v * v
    return Norms(float(np.sum(w * v2)), float(np.sum(w * v2 * v2)), grad_sq_values(v, f.grid.h))


def _check_mask(mask, grid: Grid) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise GridMismatchError(f"mask shape {mask.shape} does not match grid {grid.shape}")
    return mask


def masked_integrate(f, mask, grid: Grid | None = None) -> float:
    grid = f.grid if isinstance(f, Field) else grid
    vals = as_values(f, grid)
    mask = _check_mask(mask, grid)
    return float(np.sum(np.where(mask, grid.weights(), 0.0) * vals))


def masked_grad_l2sq(f, mask, grid: Grid | None = None) -> float:
    grid = f.grid if isinstance(f, Field) else grid
    vals = as_values(f, grid)
    return grad_sq_values(vals, grid.h, _check_mask(mask, grid))


def stiffness_matrix(grid: Grid, free: np.ndarray, edge_mask: np.ndarray | None = None) -> sp.csr_matrix:
    """Matrix of the discrete -Laplacian acting on the nodes selected by ``free``.

    ``edge_mask=None`` keeps every grid edge, so nodes outside ``free`` act as
    homogeneous Dirichlet data.  Passing ``edge_mask=free`` keeps only edges
    inside the set (natural / Neumann condition on its rim).
    """
    n, dim, h = grid.n, grid.dim, grid.h
    ids = np.arange(grid.size).reshape(grid.shape)
    rows, cols = [], []
    for k in range(dim):
        lo = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[k] = slice(0, n - 1)
        hi[k] = slice(1, n)
        i0 = ids[tuple(lo)]
        i1 = ids[tuple(hi)]
        if edge_mask is not None:
            keep = edge_mask[tuple(lo)] & edge_mask[tuple(hi)]
            i0, i1 = i0[keep], i1[keep]
        rows.append(i0.ravel())
        cols.append(i1.ravel())
    e0 = np.concatenate(rows)
    e1 = np.concatenate(cols)
    m = e0.size
    inc = sp.csr_matrix(
        (np.concatenate([np.ones(m), -np.ones(m)]), (np.tile(np.arange(m), 2), np.concatenate([e0, e1]))),
        shape=(m, grid.size),
    )
    full = (inc.T @ inc).tocsr() / (h * h)
    sel = np.flatnonzero(np.asarray(free, dtype=bool).ravel())
    return full[sel][:, sel].tocsr()


def dump_field(f: Field, path, name: str = "") -> tuple[Path, Path]:
    """Write ``path.bin`` (little-endian float64, C order) and ``path.json`` header."""
    path = Path(path)
    bin_path = path.with_suffix(".bin")
    hdr_path = path.with_suffix(".json")
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    f.values.astype("<f8").tofile(bin_path)
    hdr = f.grid.header(name or path.stem)
    hdr["dtype"] = "<f8"
    hdr["order"] = "C"
    hdr_path.write_text(json.dumps(hdr, indent=2))
    return bin_path, hdr_path


def load_field(path) -> tuple[Field, str]:
    path = Path(path)
    hdr = json.loads(path.with_suffix(".json").read_text())
    grid = Grid(hdr["dim"], hdr["n"], hdr["L"], tuple(hdr.get("center") or ()) or None)
    vals = np.fromfile(path.with_suffix(".bin"), dtype="<f8").reshape(grid.shape)
    return Field(grid, vals, enforce_dirichlet=False), hdr.get("name", "")
