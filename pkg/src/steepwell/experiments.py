"""Experiment harness: JSON configs, lambda/beta sweeps, multiplicity catalogs, emission."""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .errors import CertificationFailed, ConfigError, SteepWellError
from .functionals import Params, eps_overlap_fraction
from .grid import Grid, dump_field
from .potentials import PotentialSet, PotentialSpec, Well, WellGeometry, build_potentials
from .solvers import (SolveConfig, SolveResult, reference_bumps, sandwich_bounds, solve_ground, solve_multibump,
                      solve_scalar)

PHYSICS_KEYS = ("lambda", "beta", "mu1", "mu2")


class SweepAborted(SteepWellError):
    """A solve inside a sweep failed; ``rows`` holds what finished before it."""

    def __init__(self, message, rows, cause):
        super().__init__(message)
        self.rows = rows
        self.cause = cause


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing required key '{key}' in {where}")
    return d[key]


def _monotone(seq, increasing: bool) -> bool:
    return all((b > a) if increasing else (b < a) for a, b in zip(seq, seq[1:]))


@dataclass
class ExperimentConfig:
    raw: dict
    grid: Grid
    geometry: WellGeometry
    potential: PotentialSpec
    params: dict                      # physics values, possibly missing the swept key
    sweep_axis: str | None = None     # "lambda" or "beta"
    sweep_values: tuple = ()
    selection: tuple | None = None    # (J_a, J_b), 0-based
    solver: SolveConfig = field(default_factory=SolveConfig)
    out_dir: str | None = None
    emit_fields: bool = False
    warm_start: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if "config" in d and "config_hash" in d:   # a run manifest: replay its config
            d = d["config"]
        try:
            g = _need(d, "grid", "config")
            grid = Grid(int(_need(g, "dim", "grid")), int(_need(g, "n", "grid")), float(_need(g, "L", "grid")),
                        tuple(g["center"]) if g.get("center") is not None else None)
            w = _need(d, "wells", "config")

            def mk(spec):
                if "radius" in spec:
                    return Well(tuple(spec["center"]), radius=float(spec["radius"]))
                return Well(tuple(spec["center"]), half_widths=tuple(_need(spec, "half_widths", "well")))

            geometry = WellGeometry(tuple(mk(s) for s in _need(w, "a", "wells")),
                                    tuple(mk(s) for s in _need(w, "b", "wells")), float(_need(w, "margin", "wells")))
            pz = _need(d, "potential", "config")
            potential = PotentialSpec(float(_need(pz, "a_inf", "potential")), float(_need(pz, "b_inf", "potential")),
                                      float(_need(pz, "ramp_width", "potential")),
                                      _need(pz, "a0", "potential"), _need(pz, "b0", "potential"))
            params = dict(_need(d, "params", "config"))
            unknown = set(params) - set(PHYSICS_KEYS)
            if unknown:
                raise ConfigError(f"unknown params: {sorted(unknown)}")
            axis, values = None, ()
            if d.get("sweep"):
                sw = d["sweep"]
                if len(sw) != 1 or next(iter(sw)) not in ("lambda", "beta"):
                    raise ConfigError("sweep must have exactly one key, 'lambda' or 'beta'")
                axis = next(iter(sw))
                values = tuple(float(x) for x in sw[axis])
                if not values:
                    raise ConfigError("sweep list is empty")
            for k in PHYSICS_KEYS:
                if k not in params and k != axis:
                    raise ConfigError(f"missing required physics parameter '{k}'")
            selection = None
            if d.get("selection") is not None:
                s = d["selection"]
                selection = (tuple(int(i) for i in _need(s, "a", "selection")),
                             tuple(int(j) for j in _need(s, "b", "selection")))
            solver = SolveConfig.from_dict(d.get("solver"))
            out = d.get("output") or {}
            cfg = cls(raw=d, grid=grid, geometry=geometry, potential=potential, params=params, sweep_axis=axis,
                      sweep_values=values, selection=selection, solver=solver, out_dir=out.get("dir"),
                      emit_fields=bool(out.get("emit_fields", False)), warm_start=bool(d.get("warm_start", True)))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d)

    def check(self) -> None:
        if self.sweep_axis == "lambda" and not _monotone(self.sweep_values, True):
            raise ConfigError("lambda sweep must be strictly increasing")
        if self.sweep_axis == "beta" and not _monotone(self.sweep_values, False):
            raise ConfigError("beta sweep must be strictly decreasing")
        if self.selection is not None:
            for J, n, s in ((self.selection[0], self.geometry.n_a, "a"), (self.selection[1], self.geometry.n_b, "b")):
                if not J:
                    raise ConfigError(f"selection for {s} is empty")
                if any(i < 0 or i >= n for i in J):
                    raise ConfigError(f"selection for {s} references a missing well (have {n})")
        for v in self.sweep_values:
            self.make_params(v)

    def make_params(self, value: float | None = None) -> Params:
        d = dict(self.params)
        if self.sweep_axis is not None and value is not None:
            d[self.sweep_axis] = value
        try:
            return Params(float(d["lambda"]), float(d["beta"]), float(d["mu1"]), float(d["mu2"]))
        except KeyError as exc:
            raise ConfigError(f"parameter {exc} not set") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build(self) -> PotentialSet:
        return build_potentials(self.geometry, self.potential, self.grid)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ------------------------------------------------------------------------ rows

@dataclass
class SweepRow:
    param: str
    value: float
    mode: str
    energy: float
    lower: float
    upper: float
    tail_a: float
    tail_b: float
    well_energy_a: tuple
    well_energy_b: tuple
    overlap: float
    eps_overlap: float
    D: float
    certified: bool | None
    iterations: int
    residual: float
    wall_time: float = field(default=0.0, compare=False)

    def columns(self) -> list[str]:
        return row_columns(len(self.well_energy_a), len(self.well_energy_b))

    def csv_values(self) -> list[str]:
        f = lambda x: format(float(x), ".17g")  # noqa: E731
        cert = "" if self.certified is None else str(int(bool(self.certified)))
        return ([self.param, f(self.value), self.mode, f(self.energy), f(self.lower), f(self.upper),
                 f(self.tail_a), f(self.tail_b)]
                + [f(x) for x in self.well_energy_a] + [f(x) for x in self.well_energy_b]
                + [f(self.overlap), f(self.eps_overlap), f(self.D), cert, str(int(self.iterations)), f(self.residual)])


def row_columns(n_a: int, n_b: int) -> list[str]:
    return (["param", "value", "mode", "energy", "lower", "upper", "tail_a", "tail_b"]
            + [f"well_energy_a{i}" for i in range(n_a)] + [f"well_energy_b{j}" for j in range(n_b)]
            + ["overlap", "eps_overlap", "D", "certified", "iterations", "residual"])


def parse_rows_csv(text: str) -> list[SweepRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    n_a = sum(c.startswith("well_energy_a") for c in header)
    n_b = sum(c.startswith("well_energy_b") for c in header)
    if header != row_columns(n_a, n_b):
        raise ValueError("unexpected CSV header")
    rows = []
    for rec in reader:
        it = iter(rec)
        param, value, mode = next(it), float(next(it)), next(it)
        nums = [float(next(it)) for _ in range(5)]
        wa = tuple(float(next(it)) for _ in range(n_a))
        wb = tuple(float(next(it)) for _ in range(n_b))
        overlap, eps, D = (float(next(it)) for _ in range(3))
        c = next(it)
        cert = None if c == "" else bool(int(c))
        iters, resid = int(next(it)), float(next(it))
        rows.append(SweepRow(param, value, mode, *nums, wa, wb, overlap, eps, D, cert, iters, resid))
    return rows


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(rows[0].columns())
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def _row(param, value, res: SolveResult, lower, upper, wall) -> SweepRow:
    d = res.diagnostics
    eps = eps_overlap_fraction(res.u, res.v)["fraction"]
    cert = None if res.certification is None else res.certification.ok
    return SweepRow(param, float(value), res.mode, res.energy.total, lower, upper, d.tail_a, d.tail_b,
                    tuple(d.well_energy_a), tuple(d.well_energy_b), d.overlap, eps, res.D, cert,
                    res.iterations, res.residual, wall)


@dataclass
class SweepTable:
    rows: list
    results: list
    axis: str
    config: ExperimentConfig
    total_time: float = 0.0


class _Context:
    """Per-run caches: potentials and the lambda-independent reference bumps."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.pots = cfg.build()
        self._refs = None

    def refs(self, p: Params):
        # The bare-well bumps depend on mu but not on lambda or beta.
        key = (p.mu1, p.mu2)
        if self._refs is None or self._refs[0] != key:
            self._refs = (key, reference_bumps(self.pots, p, self.cfg.solver))
        return self._refs[1]


def _solve_one(ctx: _Context, p: Params, init):
    """One row: ground solve without a selection, penalised multibump solve with one."""
    cfg = ctx.cfg
    refs = ctx.refs(p)
    if cfg.selection is None:
        res = solve_ground(ctx.pots, p, cfg.solver, init=init, refs=refs)
        return res, res.sandwich.lower, res.sandwich.upper
    J_a, J_b = cfg.selection
    try:
        res = solve_multibump(ctx.pots, p, cfg.selection, cfg.solver, init=init, refs=refs, require_certified=False)
    except CertificationFailed as exc:   # pragma: no cover - require_certified=False never raises
        res = exc.result
    lam_refs = [solve_scalar(i, "a", ctx.pots, p, cfg.solver, with_lambda=True) for i in J_a] + \
               [solve_scalar(j, "b", ctx.pots, p, cfg.solver, with_lambda=True) for j in J_b]
    return res, sum(r.m_lam for r in lam_refs), sum(r.m for r in lam_refs)


def _run_sweep(cfg: ExperimentConfig, axis: str, threads: int = 1, progress=None) -> SweepTable:
    if cfg.sweep_axis != axis:
        raise ConfigError(f"config has no {axis} sweep")
    ctx = _Context(cfg)
    t0 = time.perf_counter()
    rows, results = [], []

    def one(value, init):
        p = cfg.make_params(value)
        t = time.perf_counter()
        res, lo, up = _solve_one(ctx, p, init)
        return res, _row(axis, value, res, lo, up, time.perf_counter() - t)

    if cfg.warm_start or threads <= 1:
        init = None
        for value in cfg.sweep_values:
            try:
                res, row = one(value, init)
            except SteepWellError as exc:
                raise SweepAborted(f"{axis}={value}: {exc}", rows, exc) from exc
            rows.append(row)
            results.append(res)
            if progress:
                progress(row)
            if cfg.warm_start:
                init = (res.u, res.v)
    else:
        ctx.refs(cfg.make_params(cfg.sweep_values[0]))   # fill the cache before fanning out
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(one, v, None) for v in cfg.sweep_values]
            for v, fut in zip(cfg.sweep_values, futs):
                try:
                    res, row = fut.result()
                except SteepWellError as exc:
                    raise SweepAborted(f"{axis}={v}: {exc}", rows, exc) from exc
                rows.append(row)
                results.append(res)
    return SweepTable(rows, results, axis, cfg, time.perf_counter() - t0)


def run_lambda_sweep(cfg: ExperimentConfig, threads: int = 1, progress=None) -> SweepTable:
    """Solve at each lambda (ground state, or multibump when a selection is set)."""
    return _run_sweep(cfg, "lambda", threads, progress)


def run_beta_sweep(cfg: ExperimentConfig, threads: int = 1, progress=None) -> SweepTable:
    return _run_sweep(cfg, "beta", threads, progress)


# ---------------------------------------------------------------- multiplicity

@dataclass
class CatalogEntry:
    J_a: tuple
    J_b: tuple
    energy: float
    penalized_energy: float
    certified: bool
    residual: float
    unmodified_residual: float
    max_outside_a: float
    max_outside_b: float
    pattern: tuple
    unselected_mass_fraction: float
    error: str = ""
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class Catalog:
    entries: list
    results: list
    config: ExperimentConfig
    total_time: float = 0.0

    @property
    def distinct_certified(self) -> int:
        return len({e.pattern for e in self.entries if e.certified and not e.error})


def nonempty_selections(n_a: int, n_b: int) -> list[tuple]:
    def subsets(n):
        return [c for k in range(1, n + 1) for c in itertools.combinations(range(n), k)]
    return [(Ja, Jb) for Ja in subsets(n_a) for Jb in subsets(n_b)]


def _unselected_fraction(res: SolveResult, J_a, J_b) -> float:
    d = res.diagnostics
    total = sum(d.mass_a) + sum(d.mass_b)
    off = sum(m for i, m in enumerate(d.mass_a) if i not in J_a) + sum(m for j, m in enumerate(d.mass_b) if j not in J_b)
    return off / total if total > 0 else float("nan")


def run_multiplicity(cfg: ExperimentConfig, threads: int = 1, progress=None) -> Catalog:
    """Solve the penalised problem for every nonempty well selection and catalog the results."""
    ctx = _Context(cfg)
    p = cfg.make_params()
    refs = ctx.refs(p)
    from .potentials import coercivity
    from .penalty import make_penalty
    C_ab = coercivity(ctx.pots, p.lam).C_ab
    sels = nonempty_selections(ctx.pots.geometry.n_a, ctx.pots.geometry.n_b)
    t0 = time.perf_counter()

    def one(sel):
        t = time.perf_counter()
        pen = make_penalty(ctx.pots, p, sel, C_ab=C_ab)
        try:
            res = solve_multibump(ctx.pots, p, sel, cfg.solver, refs=refs, pen=pen, require_certified=False)
        except SteepWellError as exc:
            nan = float("nan")
            return None, CatalogEntry(sel[0], sel[1], nan, nan, False, nan, nan, nan, nan, (), nan,
                                      error=f"{type(exc).__name__}: {exc}", wall_time=time.perf_counter() - t)
        c = res.certification
        return res, CatalogEntry(sel[0], sel[1], res.energy.total, res.penalized_energy.total, c.ok, res.residual,
                                 res.unmodified_residual, c.max_outside_a, c.max_outside_b, res.mass_pattern(),
                                 _unselected_fraction(res, *sel), wall_time=time.perf_counter() - t)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            outs = list(ex.map(one, sels))
    else:
        outs = []
        for s in sels:
            outs.append(one(s))
            if progress:
                progress(outs[-1][1])
    return Catalog([e for _, e in outs], [r for r, _ in outs], cfg, time.perf_counter() - t0)


def catalog_csv(cat: Catalog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    f = lambda x: format(float(x), ".17g")  # noqa: E731
    w.writerow(["J_a", "J_b", "energy", "penalized_energy", "certified", "residual", "unmodified_residual",
                "max_outside_a", "max_outside_b", "pattern", "unselected_mass_fraction", "error"])
    for e in cat.entries:
        w.writerow([" ".join(map(str, e.J_a)), " ".join(map(str, e.J_b)), f(e.energy), f(e.penalized_energy),
                    int(e.certified), f(e.residual), f(e.unmodified_residual), f(e.max_outside_a),
                    f(e.max_outside_b), "".join("1" if b else "0" for b in e.pattern),
                    f(e.unselected_mass_fraction), e.error])
    return buf.getvalue()


# ------------------------------------------------------------------- emission

def versions() -> dict:
    from . import __version__
    return {"steepwell": __version__, "python": sys.version.split()[0], "numpy": np.__version__,
            "scipy": scipy.__version__, "platform": platform.platform()}


def emit(results, cfg: ExperimentConfig, out_dir=None, *, emit_fields: bool | None = None, command: str = "") -> dict:
    """Write the CSV table, a JSON manifest and optional field dumps; returns the paths written."""
    if isinstance(results, Catalog):
        if not results.entries:
            raise ValueError("nothing to emit")
        csv_text, name = catalog_csv(results), "catalog.csv"
        solves = [r for r in results.results if r is not None]
        timings = [e.wall_time for e in results.entries]
        labels = [f"a{'-'.join(map(str, e.J_a))}_b{'-'.join(map(str, e.J_b))}" for e in results.entries if e.error == ""]
    else:
        rows = results.rows if isinstance(results, SweepTable) else list(results)
        if not rows:
            raise ValueError("nothing to emit")
        csv_text, name = rows_to_csv(rows), "rows.csv"
        solves = results.results if isinstance(results, SweepTable) else []
        timings = [r.wall_time for r in rows]
        labels = [f"{r.param}_{i:03d}" for i, r in enumerate(rows)]
    out = Path(out_dir or cfg.out_dir or "out")
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / name, "manifest": out / "manifest.json"}
        paths["csv"].write_text(csv_text)
        manifest = {
            "command": command, "config": cfg.raw, "config_hash": cfg.hash, "versions": versions(),
            "seed": cfg.solver.seed, "timings": {"rows": timings,
                                                 "total": getattr(results, "total_time", float(sum(timings)))},
            "csv": name,
        }
        paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
        do_fields = cfg.emit_fields if emit_fields is None else emit_fields
        if do_fields:
            for lab, res in zip(labels, solves):
                dump_field(res.u, out / "fields" / f"{lab}_u", f"{lab}_u")
                dump_field(res.v, out / "fields" / f"{lab}_v", f"{lab}_v")
    except OSError as exc:
        raise ConfigError(f"cannot write to output directory {out}: {exc}") from exc
    return paths


def scalar_table(cfg: ExperimentConfig) -> list[dict]:
    pots = cfg.build()
    p = cfg.make_params(cfg.sweep_values[0] if cfg.sweep_values else None)
    rows = []
    for side in ("a", "b"):
        for k in range(len(pots.geometry.wells(side))):
            r = solve_scalar(k, side, pots, p, cfg.solver, with_lambda=True)
            rows.append({"side": side, "well": k, "m": r.m, "m_lambda": r.m_lam, "R": r.R_scale,
                         "residual": r.residual, "iterations": r.iterations})
    return rows

