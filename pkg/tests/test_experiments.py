import copy
import json

import numpy as np
import pytest

import steepwell.solvers as solvers_mod
from steepwell import Params
from steepwell.cli import main
from steepwell.errors import ConfigError
from steepwell.experiments import (ExperimentConfig, SweepRow, emit, nonempty_selections, parse_rows_csv,
                                   rows_to_csv, run_beta_sweep, run_lambda_sweep, run_multiplicity)
from steepwell.penalty import make_penalty
from steepwell.solvers import solve_ground

BASE = {
    "grid": {"dim": 1, "n": 801, "L": 14.0},
    "wells": {"margin": 0.4,
              "a": [{"center": [-2.0], "half_widths": [1.0]}],
              "b": [{"center": [2.0], "half_widths": [1.0]}]},
    "potential": {"a_inf": 1.0, "b_inf": 1.0, "ramp_width": 0.1, "a0": 1.0, "b0": 1.0},
    "params": {"beta": -1.0, "mu1": 1.0, "mu2": 1.0},
    "sweep": {"lambda": [10.0, 30.0, 100.0]},
}


def cfg_dict(**over):
    d = copy.deepcopy(BASE)
    for k, v in over.items():
        if v is None:
            d.pop(k, None)
        else:
            d[k] = v
    return d


def write_cfg(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


# ------------------------------------------------------------------ config

@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d["sweep"].update({"lambda": [100.0, 10.0]}), "increasing"),
    (lambda d: d.update({"sweep": {"beta": [-1.0, -0.5]}, "params": {"lambda": 10.0, "mu1": 1, "mu2": 1}}), "decreasing"),
    (lambda d: d["params"].pop("beta"), "beta"),
    (lambda d: d.update({"selection": {"a": [3], "b": [0]}, "params": {**d["params"], "lambda": 10.0}}), "missing well"),
    (lambda d: d.update({"selection": {"a": [], "b": [0]}}), "empty"),
    (lambda d: d["params"].update({"gamma": 1.0}), "unknown"),
    (lambda d: d.pop("grid"), "grid"),
    (lambda d: d.update({"solver": {"bogus_knob": 1}}), "bogus"),
    (lambda d: d["params"].update({"beta": 1.0}), "beta"),
])
def test_config_rejects(mutate, msg):
    d = cfg_dict()
    mutate(d)
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict(d)


def test_config_solver_defaults_and_hash():
    cfg = ExperimentConfig.from_dict(cfg_dict())
    assert cfg.sweep_axis == "lambda" and cfg.sweep_values == (10.0, 30.0, 100.0)
    assert cfg.solver.max_iters > 0
    # the hash ignores key order
    d = cfg_dict()
    shuffled = dict(reversed(list(d.items())))
    assert ExperimentConfig.from_dict(shuffled).hash == cfg.hash
    d["params"]["beta"] = -2.0
    assert ExperimentConfig.from_dict(d).hash != cfg.hash


def test_selections_enumeration():
    assert nonempty_selections(1, 1) == [((0,), (0,))]
    assert len(nonempty_selections(2, 2)) == 9
    assert len(nonempty_selections(3, 2)) == 21


# ---------------------------------------------------------------- sweeps / csv

@pytest.fixture(scope="module")
def lam_table():
    return run_lambda_sweep(ExperimentConfig.from_dict(cfg_dict()))


def test_lambda_sweep_rows(lam_table):
    rows = lam_table.rows
    assert [r.value for r in rows] == [10.0, 30.0, 100.0]
    for r in rows:
        assert r.mode == "ground" and r.certified is None
        scale = max(1.0, abs(r.upper))
        assert r.lower <= r.energy <= r.upper + 1e-6 * scale
        assert r.D > 0
    tails = [r.tail_a for r in rows]
    assert tails[0] > tails[1] > tails[2]


def test_csv_roundtrip(lam_table):
    text = rows_to_csv(lam_table.rows)
    back = parse_rows_csv(text)
    assert back == lam_table.rows
    assert rows_to_csv(back) == text
    header = text.splitlines()[0].split(",")
    assert header[:4] == ["param", "value", "mode", "energy"] and "wall_time" not in header


def test_csv_bytes_deterministic(lam_table, tmp_path):
    again = run_lambda_sweep(ExperimentConfig.from_dict(cfg_dict()))
    assert rows_to_csv(again.rows) == rows_to_csv(lam_table.rows)


def test_single_row_sweep_matches_direct_solve():
    cfg = ExperimentConfig.from_dict(cfg_dict(sweep={"lambda": [30.0]}))
    row = run_lambda_sweep(cfg).rows[0]
    res = solve_ground(cfg.build(), cfg.make_params(30.0), cfg.solver)
    assert row.energy == res.energy.total
    assert row.iterations == res.iterations
    assert row.residual == res.residual
    assert row.tail_a == res.diagnostics.tail_a


def test_warm_and_cold_agree(lam_table):
    cold = run_lambda_sweep(ExperimentConfig.from_dict(cfg_dict(warm_start=False)), threads=2)
    for w, c in zip(lam_table.rows, cold.rows):
        assert w.value == c.value
        assert abs(w.energy - c.energy) <= 1e-6 * abs(c.energy)


def test_beta_sweep_far_wells_no_overlap():
    d = cfg_dict(sweep={"beta": [-1.0, -10.0, -100.0]})
    d["params"] = {"lambda": 100.0, "mu1": 1.0, "mu2": 1.0}
    d["potential"]["a_inf"] = d["potential"]["b_inf"] = 4.0
    d["wells"]["a"][0]["center"] = [-3.5]
    d["wells"]["b"][0]["center"] = [3.5]
    rows = run_beta_sweep(ExperimentConfig.from_dict(d)).rows
    for r in rows:
        assert r.overlap < 1e-12
        assert r.eps_overlap == 0.0


def test_sweep_abort_keeps_partial_rows(monkeypatch):
    from steepwell.errors import NonConvergence
    from steepwell.experiments import SweepAborted
    import steepwell.experiments as ex

    real = ex.solve_ground
    calls = []

    def flaky(pots, p, *a, **k):
        calls.append(p.lam)
        if len(calls) == 2:
            raise NonConvergence("forced", residual=1.0, history=[])
        return real(pots, p, *a, **k)

    monkeypatch.setattr(ex, "solve_ground", flaky)
    with pytest.raises(SweepAborted) as info:
        run_lambda_sweep(ExperimentConfig.from_dict(cfg_dict()))
    assert len(info.value.rows) == 1 and info.value.rows[0].value == 10.0


# ---------------------------------------------------------------- emission

def test_emit_writes_manifest_and_replays(lam_table, tmp_path):
    cfg = lam_table.config
    paths = emit(lam_table, cfg, tmp_path / "run", emit_fields=True, command="sweep-lambda")
    man = json.loads(paths["manifest"].read_text())
    assert man["config_hash"] == cfg.hash and man["config"] == cfg.raw
    assert {"numpy", "scipy", "python"} <= set(man["versions"])
    assert len(man["timings"]["rows"]) == 3
    assert (tmp_path / "run" / "fields" / "lambda_000_u.bin").exists()
    replay = ExperimentConfig.from_dict(man)
    assert replay.hash == cfg.hash
    again = run_lambda_sweep(replay)
    assert rows_to_csv(again.rows) == paths["csv"].read_text()


def test_emit_empty_writes_nothing(tmp_path):
    cfg = ExperimentConfig.from_dict(cfg_dict())
    out = tmp_path / "empty"
    with pytest.raises(ValueError):
        emit([], cfg, out)
    assert not out.exists()


def test_emit_unwritable(tmp_path, lam_table):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ConfigError):
        emit(lam_table, lam_table.config, blocker / "sub")


# ------------------------------------------------------------ multiplicity

def test_multiplicity_single_pair():
    d = cfg_dict(sweep=None)
    d["params"]["lambda"] = 100.0
    cat = run_multiplicity(ExperimentConfig.from_dict(d))
    assert len(cat.entries) == 1
    assert cat.distinct_certified == 1


def test_multiplicity_energy_order_by_inclusion():
    d = cfg_dict(sweep=None)
    d["grid"] = {"dim": 1, "n": 2401, "L": 24.0}
    d["wells"] = {"margin": 0.4,
                  "a": [{"center": [-7.5], "half_widths": [1.5]}, {"center": [2.5], "half_widths": [1.5]}],
                  "b": [{"center": [-2.5], "half_widths": [1.5]}]}
    d["potential"].update(a_inf=4.0, b_inf=4.0, ramp_width=0.1)
    d["params"]["lambda"] = 1000.0
    cat = run_multiplicity(ExperimentConfig.from_dict(d))
    assert len(cat.entries) == 3 and cat.distinct_certified == 3
    by = {(e.J_a, e.J_b): e.energy for e in cat.entries}
    tol = 1e-6
    for (Ja, Jb), E in by.items():
        for (Ja2, Jb2), E2 in by.items():
            if set(Ja) >= set(Ja2) and set(Jb) >= set(Jb2):
                assert E >= E2 - tol


# --------------------------------------------------------------------- CLI

def test_cli_exit_codes(tmp_path, capsys):
    good = write_cfg(tmp_path, cfg_dict())
    assert main(["validate", "--config", str(good)]) == 0
    assert main(["sweep-lambda", "--config", str(good), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "rows.csv").exists()

    bad = write_cfg(tmp_path, cfg_dict(sweep={"lambda": [3.0, 1.0]}), "bad.json")
    assert main(["sweep-lambda", "--config", str(bad)]) == 2
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 2

    overlapping = cfg_dict()
    overlapping["wells"]["b"][0]["center"] = [-1.5]
    assert main(["validate", "--config", str(write_cfg(tmp_path, overlapping, "ov.json"))]) == 2

    starved = cfg_dict(sweep={"lambda": [10.0]}, solver={"max_iters": 2})
    assert main(["sweep-lambda", "--config", str(write_cfg(tmp_path, starved, "st.json")),
                 "--out", str(tmp_path / "s")]) == 3


def test_cli_strict_certification(tmp_path, monkeypatch):
    d = cfg_dict(sweep=None, selection={"a": [0], "b": [0]})
    d["params"]["lambda"] = 100.0
    path = write_cfg(tmp_path, d)
    assert main(["solve-multibump", "--config", str(path), "--out", str(tmp_path / "ok"), "--strict"]) == 0

    # shrink the cut-off level so the same solution can no longer be certified
    monkeypatch.setattr(solvers_mod, "make_penalty", lambda pots, p, sel: make_penalty(pots, p, sel, C_ab=1e-10))
    assert main(["solve-multibump", "--config", str(path), "--out", str(tmp_path / "nc")]) == 0
    assert main(["solve-multibump", "--config", str(path), "--out", str(tmp_path / "nc"), "--strict"]) == 4
