import math

import numpy as np
import pytest

from dlab.dynamics import Trajectory
from dlab.harness import (
    ConfigError,
    ExperimentConfig,
    csv_text,
    dumps,
    fmt,
    json_text,
    load_atlas,
    load_field,
    load_trajectory,
    loads,
    montecarlo_schedule,
    read_csv,
    run,
    save_atlas,
    save_field,
    save_trajectory,
    write_csv,
)
from dlab.harness.cli import main
from dlab.harness.config import apply_overrides, from_mapping
from dlab.harness.containers import ContainerError
from dlab.harness.reports import has_nan, json_has_nan
from dlab.harness.runner import RunManifest
from dlab.harness.schedule import default_workers
from dlab.randomization import build_atlas
from dlab.spectral import Field, Grid

from conftest import band_limited

# ---- config ----


def test_config_round_trip():
    cfg = ExperimentConfig("montecarlo", seed=7, betas=[2, 6], eps=[0.2, 0.1], norms=["X", "Z"], forcing_level=3)
    again = loads(dumps(cfg))
    assert again == cfg
    assert dumps(again) == dumps(cfg)
    assert cfg.forcing_truncation == 3
    assert ExperimentConfig("evolve").forcing_truncation is None


def test_config_rejects_unknown_keys_and_types():
    with pytest.raises(ConfigError, match="unknown config keys: bogus"):
        loads('kind = "evolve"\nbogus = 1\n')
    with pytest.raises(ConfigError, match="missing required key"):
        loads("seed = 1\n")
    with pytest.raises(ConfigError, match="expected an integer"):
        loads('kind = "evolve"\nseed = "one"\n')
    with pytest.raises(ConfigError, match="nested tables"):
        loads('kind = "evolve"\n[seed]\nvalue = 1\n')
    with pytest.raises(ConfigError, match="malformed"):
        loads('kind = "evolve\n')


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="trials must be ≥ 1"):
        ExperimentConfig("montecarlo", trials=0)
    with pytest.raises(ConfigError):
        ExperimentConfig("montecarlo", betas=[3])
    with pytest.raises(ConfigError):
        ExperimentConfig("norms", norms=["Q"])
    with pytest.raises(ConfigError):
        ExperimentConfig("evolve", points=100)
    with pytest.raises(ConfigError):
        ExperimentConfig("nonsense")


def test_config_int_promotes_to_float():
    cfg = from_mapping({"kind": "evolve", "dt": 1, "t1": 2})
    assert isinstance(cfg.dt, float) and cfg.dt == 1.0
    assert apply_overrides(cfg, seed=5, out=None).seed == 5


# ---- reports ----


def test_fmt_round_trips_floats():
    rng = np.random.default_rng(0)
    for x in np.concatenate([rng.standard_normal(50) * 10.0 ** rng.integers(-300, 300, 50), [0.1, 1 / 3, -0.0]]):
        assert float(fmt(x)) == x
    assert fmt(math.nan) == "nan" and fmt(math.inf) == "inf" and fmt(-math.inf) == "-inf"


def test_csv_round_trip(tmp_path):
    rows = [{"a": 0.1 + 0.2, "b": 3, "c": True}, {"a": math.nan, "b": -1, "c": False}]
    path = write_csv(tmp_path / "t.csv", rows, quantity="test quantity")
    back = read_csv(path)
    assert list(back[0]) == ["quantity", "a", "b", "c"]
    assert float(back[0]["a"]) == 0.1 + 0.2
    assert back[1]["a"] == "nan" and back[0]["c"] == "true"
    assert has_nan(rows)


def test_empty_csv_is_header_only():
    assert csv_text([], columns=["x", "y"]) == "x,y\n"
    assert csv_text([], columns=["x"], quantity="q") == "quantity,x\n"


def test_json_is_sorted_and_nan_safe():
    text = json_text({"b": 1.0, "a": [math.nan, np.float64(2.5)], "c": np.int64(3)})
    assert text.index('"a"') < text.index('"b"')
    assert '"nan"' in text
    assert json_has_nan({"x": [1.0, {"y": math.nan}]})
    assert not json_has_nan({"x": "nan"})


# ---- containers ----


def test_field_and_trajectory_round_trip(tmp_path):
    g = Grid(2, 8.0, 16)
    f = band_limited(g, np.random.default_rng(1), 3.0)
    back = load_field(save_field(tmp_path / "f.dlab", f))
    assert back.grid == g and np.array_equal(back.values, f.values)
    traj = Trajectory(g, [0.0, 0.5, 1.0], np.stack([f.values] * 3), 0.5, {"method": "strang", "n": 2})
    tb = load_trajectory(save_trajectory(tmp_path / "t.dlab", traj))
    assert np.array_equal(tb.states, traj.states) and np.array_equal(tb.times, traj.times)
    assert tb.metadata["n"] == 2 and tb.dt == 0.5


def test_container_bytes_are_deterministic(tmp_path):
    g = Grid(1, 8.0, 32)
    f = band_limited(g, np.random.default_rng(2), 2.0)
    a = save_field(tmp_path / "a.dlab", f).read_bytes()
    b = save_field(tmp_path / "b.dlab", f).read_bytes()
    assert a == b


def test_atlas_round_trip(tmp_path):
    g = Grid(1, 16.0, 64)
    atlas = build_atlas(band_limited(g, np.random.default_rng(3), 2.0))
    back = load_atlas(save_atlas(tmp_path / "atlas.dlab", atlas))
    assert back.keys == atlas.keys
    assert (back.matrix != atlas.matrix).nnz == 0
    draws = np.linspace(-1, 1, len(atlas))
    assert np.array_equal(back.assemble(draws).values, atlas.assemble(draws).values)


def test_container_kind_and_magic_checked(tmp_path):
    g = Grid(1, 8.0, 16)
    path = save_field(tmp_path / "f.dlab", Field.zeros(g))
    with pytest.raises(ContainerError, match="expected trajectory"):
        load_trajectory(path)
    bad = tmp_path / "bad.dlab"
    bad.write_bytes(b"not a container\n")
    with pytest.raises(ContainerError):
        load_field(bad)


# ---- scheduling ----


def _task(i):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([99, i])))
    x = rng.standard_normal(1000)
    return {"mean": float(x.mean()), "max": float(x.max())}


def test_worker_count_independence():
    a = montecarlo_schedule(_task, 40, workers=1)
    b = montecarlo_schedule(_task, 40, workers=8)
    assert a.rows() == b.rows()
    assert all(np.array_equal(a.values[n], b.values[n]) for n in a.names)


def test_single_task_summary():
    s = montecarlo_schedule(_task, 1, workers=4)
    assert s.count == 1 and math.isnan(s.std("mean"))
    assert s.mean("mean") == s.maxima["mean"] == s.minima["mean"]


def test_failed_draw_is_reported():
    def task(i):
        if i == 3:
            raise RuntimeError("boom")
        return {"v": float(i)}

    s = montecarlo_schedule(task, 6, workers=3)
    assert not s.ok and s.failed == [(3, "RuntimeError: boom")]
    assert s.count == 5 and s.sums["v"] == 12.0
    assert math.isnan(s.values["v"][3])


def test_schedule_rejects_bad_counts():
    with pytest.raises(ValueError, match="trials must be ≥ 1"):
        montecarlo_schedule(_task, 0)
    with pytest.raises(ValueError):
        montecarlo_schedule(_task, 2, workers=0)


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("DLAB_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("DLAB_WORKERS", "junk")
    assert default_workers() == 1


def test_manifest_exit_codes():
    ok = RunManifest({"check": True}, {}, 0.0, {}, {"a": True}, [])
    assert ok.exit_code == 0
    assert RunManifest({"check": True}, {}, 0.0, {}, {"a": False}, []).exit_code == 1
    assert RunManifest({"check": False}, {}, 0.0, {}, {"a": False}, []).exit_code == 0
    assert RunManifest({"check": False}, {}, 0.0, {}, {}, [], [(0, "x")]).exit_code == 1


# ---- runner and CLI ----


def _write_config(path, **kw):
    path.write_text(dumps(ExperimentConfig(**kw)), encoding="utf-8")
    return str(path)


SMALL = dict(points=64, box_length=16.0)


@pytest.mark.parametrize(
    "kind, extra",
    [
        ("decompose", {}),
        ("randomize", dict(trials=64, corpus=2, datum="band_limited", band=2.0, width=2.0)),
        ("evolve", dict(t1=0.2, dt=1e-2, stride=2)),
        ("norms", dict(t1=0.2, dt=1e-2, stride=2)),
        ("montecarlo", dict(trials=6, window=0.1, snapshots=5, k_max=2)),
        ("energy_audit", dict(t1=0.2, dt=1e-2, stride=1, audit_t2=0.2, forcing_amplitude=0.05)),
        ("perturb", dict(amplitude=0.02, t1=0.2, dt=1e-3, stride=10, level=4)),
    ],
)
def test_every_kind_runs(tmp_path, kind, extra):
    cfg = ExperimentConfig(kind, out=str(tmp_path / kind), **SMALL, **extra)
    man = run(cfg)
    assert "report.json" in man.artifacts
    assert (tmp_path / kind / "manifest.json").exists()
    assert man.checks and not man.failed_draws


def test_same_config_same_bytes(tmp_path):
    base = dict(trials=8, window=0.1, snapshots=5, k_max=2, seed=11, **SMALL)
    run(ExperimentConfig("montecarlo", out=str(tmp_path / "a"), workers=1, **base))
    run(ExperimentConfig("montecarlo", out=str(tmp_path / "b"), workers=4, **base))
    for name in ("report.json", "summary.csv", "draws.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_norms_on_zero_trajectory(tmp_path, capsys):
    g = Grid(1, 16.0, 64)
    traj = Trajectory.constant(Field.zeros(g), np.linspace(0, 1, 5))
    tpath = save_trajectory(tmp_path / "zero.dlab", traj)
    cfg = _write_config(tmp_path / "c.toml", kind="norms", out=str(tmp_path / "out"), **SMALL)
    code = main(["norms", "--config", cfg, "--trajectory", str(tpath), "--spec", "V,Wdot,X"])
    lines = capsys.readouterr().out.splitlines()
    assert code == 0
    assert lines[0] == "V,Wdot,X"
    assert lines[1] == "0,0,0"


def test_cli_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('kind = "evolve"\nbogus = 3\n')
    assert main(["evolve", "--config", str(bad)]) == 2
    mismatch = _write_config(tmp_path / "m.toml", kind="norms")
    assert main(["evolve", "--config", mismatch]) == 2
    assert main(["evolve", "--config", str(tmp_path / "missing.toml")]) == 2
    zero = tmp_path / "zero.toml"
    zero.write_text('kind = "montecarlo"\ntrials = 0\n')
    assert main(["montecarlo", "--config", str(zero)]) == 2
    assert "trials must be ≥ 1" in capsys.readouterr().err


def test_cli_check_failure_exits_1(tmp_path):
    cfg = _write_config(
        tmp_path / "a.toml",
        kind="energy_audit",
        out=str(tmp_path / "out"),
        t1=0.2,
        dt=1e-2,
        stride=1,
        audit_t2=0.2,
        audit_tol=1e-300,
        forcing_amplitude=0.5,
        **SMALL,
    )
    assert main(["energy-audit", "--config", cfg]) == 0
    assert main(["energy-audit", "--config", cfg, "--check"]) == 1


def test_cli_run_error_exits_1(tmp_path, capsys):
    cfg = _write_config(tmp_path / "p.toml", kind="perturb", out=str(tmp_path / "o"), amplitude=3.0, t1=0.1, dt=1e-3, **SMALL)
    assert main(["perturb", "--config", cfg]) == 1
    assert "smallness" in capsys.readouterr().err


def test_cli_overrides_seed_and_out(tmp_path):
    cfg = _write_config(tmp_path / "c.toml", kind="evolve", t1=0.1, dt=1e-2, **SMALL)
    out = tmp_path / "elsewhere"
    assert main(["evolve", "--config", cfg, "--out", str(out), "--seed", "5", "--workers", "2"]) == 0
    text = (out / "manifest.json").read_text()
    assert '"seed": 5' in text and '"workers": 2' in text
