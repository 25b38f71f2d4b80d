"""Command-line entry point.

Exit codes: 0 success, 2 invalid config/geometry, 3 solver failure,
4 certification failure under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

from .errors import (CertificationFailed, ConditionD5Error, ConfigError, GeometryError, NotInAdmissibleSet,
                     NumericalError, SandwichViolation, SteepWellError)
from .experiments import (ExperimentConfig, SweepAborted, _row, emit, run_beta_sweep, run_lambda_sweep,
                          run_multiplicity, scalar_table)
from .potentials import coercivity
from .solvers import solve_ground, solve_multibump

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_CERT = 0, 2, 3, 4
log = logging.getLogger("steepwell")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="steepwell", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("validate", "check a config, build potentials and report coercivity"),
        ("solve-scalar", "least-energy bumps on every well"),
        ("solve-ground", "coupled ground state"),
        ("solve-multibump", "penalised multi-bump solution for the configured selection"),
        ("sweep-lambda", "concentration sweep over lambda"),
        ("sweep-beta", "phase-separation sweep over beta"),
        ("multiplicity", "solve every nonempty well selection"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, default=None, help="output directory (default: config output.dir or ./out)")
        sp.add_argument("--emit-fields", action="store_true", help="dump u and v for every row")
        sp.add_argument("--threads", type=int, default=1, help="parallel solves (cold-start sweeps and multiplicity)")
        sp.add_argument("--strict", action="store_true", help="exit 4 when any multibump result fails certification")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True))


def _out(args, cfg) -> Path:
    return Path(args.out or cfg.out_dir or "out")


def _cmd_validate(args, cfg):
    pots = cfg.build()
    report = {"config_hash": cfg.hash, "nu_a": pots.nu_a, "nu_b": pots.nu_b, **pots.bounds()}
    lams = list(cfg.sweep_values) if cfg.sweep_axis == "lambda" else [cfg.make_params().lam]
    report["C_ab"] = {str(l): coercivity(pots, l).C_ab for l in lams}
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _cmd_scalar(args, cfg):
    rows = scalar_table(cfg)
    out = _out(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scalar.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})
    for r in rows:
        print(f"{r['side']}{r['well']}: m={r['m']:.10g} m_lambda={r['m_lambda']:.10g}")
    return EXIT_OK


def _single(args, cfg, mode):
    pots = cfg.build()
    p = cfg.make_params(cfg.sweep_values[0] if cfg.sweep_values else None)
    if mode == "ground":
        res = solve_ground(pots, p, cfg.solver)
        lo, up = res.sandwich.lower, res.sandwich.upper
    else:
        if cfg.selection is None:
            raise ConfigError("solve-multibump needs a 'selection'")
        try:
            res = solve_multibump(pots, p, cfg.selection, cfg.solver, require_certified=False)
        except CertificationFailed as exc:  # pragma: no cover
            res = exc.result
        lo = up = float("nan")
    row = _row(cfg.sweep_axis or "lambda", p.lam if (cfg.sweep_axis or "lambda") == "lambda" else p.beta,
               res, lo, up, 0.0)
    emit([row], cfg, _out(args, cfg), emit_fields=args.emit_fields or None, command=args.command)
    if args.emit_fields or cfg.emit_fields:
        from .grid import dump_field
        dump_field(res.u, _out(args, cfg) / "fields" / "u", "u")
        dump_field(res.v, _out(args, cfg) / "fields" / "v", "v")
    _write_json(_out(args, cfg) / "summary.json", res.summary())
    print(json.dumps(res.summary(), indent=2))
    if mode == "multibump" and args.strict and not res.certification.ok:
        return EXIT_CERT
    return EXIT_OK


def _cmd_sweep(args, cfg, runner):
    def progress(row):
        log.info("%s=%g energy=%.10g iterations=%d", row.param, row.value, row.energy, row.iterations)
    try:
        table = runner(cfg, threads=args.threads, progress=progress)
    except SweepAborted as exc:
        if exc.rows:
            emit(exc.rows, cfg, _out(args, cfg), emit_fields=False, command=args.command)
        raise exc.cause
    emit(table, cfg, _out(args, cfg), emit_fields=args.emit_fields or None, command=args.command)
    for r in table.rows:
        print(f"{r.param}={r.value:g} energy={r.energy:.10g} tail_a={r.tail_a:.4g} tail_b={r.tail_b:.4g} "
              f"overlap={r.overlap:.4g} certified={r.certified}")
    if args.strict and any(r.certified is False for r in table.rows):
        return EXIT_CERT
    return EXIT_OK


def _cmd_multiplicity(args, cfg):
    cat = run_multiplicity(cfg, threads=args.threads)
    emit(cat, cfg, _out(args, cfg), emit_fields=args.emit_fields or None, command=args.command)
    for e in cat.entries:
        print(f"J_a={list(e.J_a)} J_b={list(e.J_b)} energy={e.energy:.10g} certified={e.certified} "
              f"pattern={''.join('1' if b else '0' for b in e.pattern)} {e.error}")
    print(f"distinct certified solutions: {cat.distinct_certified}")
    if args.strict and not all(e.certified for e in cat.entries):
        return EXIT_CERT
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    warnings.simplefilter("default")
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.command == "validate":
            return _cmd_validate(args, cfg)
        if args.command == "solve-scalar":
            return _cmd_scalar(args, cfg)
        if args.command == "solve-ground":
            return _single(args, cfg, "ground")
        if args.command == "solve-multibump":
            return _single(args, cfg, "multibump")
        if args.command == "sweep-lambda":
            return _cmd_sweep(args, cfg, run_lambda_sweep)
        if args.command == "sweep-beta":
            return _cmd_sweep(args, cfg, run_beta_sweep)
        return _cmd_multiplicity(args, cfg)
    except (ConfigError, GeometryError, ConditionD5Error) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CertificationFailed as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (NumericalError, SandwichViolation, NotInAdmissibleSet, SteepWellError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
