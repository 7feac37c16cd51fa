"""Dispatch an ExperimentConfig to the owning module and persist its outputs.

Every kind writes ``report.json`` and one or more CSV files into the output
directory, then ``manifest.json`` with the config snapshot, SHA-256 hashes of
the reports, wall-clock time and the diagnostics summary.  Only the manifest
carries timing, so report bytes depend on (config, seed) alone.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..audit import SmallnessError, bootstrap_report, energy_drift, increment_decomposition, mass_check, perturbation_experiment
from ..dynamics import ForcingTerm, RegularizedNonlinearity, StepSizeError, duhamel_residual, extract_scattering_state, solve_forced
from ..dynamics.trajectory import Trajectory
from ..norms import RandomizedStrichartz, make_spec, random_band_limited, spacetime_norm
from ..randomization import (
    RandomCoefficientFamily,
    Truncation,
    build_atlas,
    hs_stability_check,
    khintchine_check,
    min_trials,
    sobolev_norm,
)
from ..spectral import Field, Grid, dyadic_band, dyadic_project, make_partition, make_unit_partition, unit_project
from .config import ExperimentConfig
from .containers import load_trajectory, save_atlas, save_trajectory
from .reports import has_nan, json_has_nan, write_csv, write_json
from .schedule import montecarlo_schedule


class RunError(RuntimeError):
    """Run could not complete; the message says which stage failed."""


@dataclass
class RunManifest:
    config: dict
    artifacts: dict  # file name -> sha256
    wall_clock: float
    diagnostics: dict
    checks: dict
    nan_flags: list
    failed_draws: list = field(default_factory=list)

    @property
    def checks_passed(self) -> bool:
        return all(self.checks.values())

    @property
    def exit_code(self) -> int:
        if self.failed_draws:
            return 1
        if self.config.get("check") and not self.checks_passed:
            return 1
        return 0

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "artifacts": self.artifacts,
            "wall_clock_seconds": self.wall_clock,
            "diagnostics": self.diagnostics,
            "checks": self.checks,
            "checks_passed": self.checks_passed,
            "nan_flags": self.nan_flags,
            "failed_draws": [{"index": i, "error": msg} for i, msg in self.failed_draws],
            "exit_code": self.exit_code,
        }


@dataclass
class _Outcome:
    diagnostics: dict
    tables: dict  # file stem -> (rows, quantity)
    checks: dict
    extra: list = field(default_factory=list)  # paths of binary artifacts
    failed: list = field(default_factory=list)


# ---- builders --------------------------------------------------------------


def build_grid(cfg: ExperimentConfig) -> Grid:
    return Grid(cfg.dim, cfg.box_length, cfg.points)


def _datum_rng(cfg: ExperimentConfig, index: int) -> np.random.Generator:
    # separate stream from the coefficient draws: tag 1 marks data generation
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, 1, index])))


def build_datum(cfg: ExperimentConfig, grid: Grid, index: int = 0) -> Field:
    if cfg.datum == "zero":
        return Field.zeros(grid)
    if cfg.datum == "band_limited":
        return random_band_limited(grid, _datum_rng(cfg, index), cfg.band, cfg.width) * cfg.amplitude
    w2 = 2.0 * cfg.width**2

    def gauss(*xs):
        return cfg.amplitude * np.exp(-sum(x * x for x in xs) / w2) * np.exp(1j * xs[0])

    return Field.from_function(grid, gauss)


def build_forcing(cfg: ExperimentConfig, grid: Grid, amplitude: float | None = None) -> ForcingTerm:
    amp = cfg.forcing_amplitude if amplitude is None else amplitude
    w2 = 2.0 * cfg.width**2
    shift = cfg.forcing_shift

    def bump(*xs):
        return amp * np.exp(-((xs[0] - shift) ** 2 + sum(x * x for x in xs[1:])) / w2)

    return ForcingTerm(Field.from_function(grid, bump), cfg.forcing_truncation, "config forcing")


def build_reg(cfg: ExperimentConfig) -> RegularizedNonlinearity:
    return RegularizedNonlinearity.for_dimension(cfg.level, cfg.d_param, cfg.coupling)


def build_truncation(cfg: ExperimentConfig) -> Truncation:
    return Truncation(cfg.m_min or None, cfg.m_max or None, cfg.k_max, cfg.j_radius)


def _family(cfg: ExperimentConfig) -> RandomCoefficientFamily:
    return RandomCoefficientFamily(cfg.family, cfg.seed)


def _evolve(cfg: ExperimentConfig, grid: Grid) -> tuple[Trajectory, ForcingTerm, RegularizedNonlinearity]:
    reg = build_reg(cfg)
    forcing = build_forcing(cfg, grid)
    try:
        traj = solve_forced(build_datum(cfg, grid), forcing, reg, (cfg.t0, cfg.t1), cfg.dt, cfg.stride)
    except StepSizeError as exc:
        raise RunError(f"solver rejected dt={cfg.dt}: {exc}") from exc
    return traj, forcing, reg


# ---- kinds -----------------------------------------------------------------


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    nb = float(np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / nb) if nb else float(np.linalg.norm(a))


def _decompose(cfg: ExperimentConfig, out: Path) -> _Outcome:
    grid = build_grid(cfg)
    f = build_datum(cfg, grid)
    part = make_partition(grid)
    total = sum(part.weight(c) for c in part.nonempty_centers())
    pou = float(np.abs(total - 1.0).max())
    rows = []
    acc = np.zeros(grid.shape, dtype=complex)
    for m in dyadic_band(grid):
        piece = dyadic_project(f, m)
        acc += piece.values
        rows.append({"M": m, "norm": piece.norm()})
    lp = _rel(acc, f.values)
    unit = make_unit_partition(grid)
    acc_u = np.zeros(grid.shape, dtype=complex)
    for j in unit.center_list():
        acc_u += unit_project(f, j).values
    wiener = _rel(acc_u, f.values)
    atlas = build_atlas(f, build_truncation(cfg), d_param=cfg.d_param)
    path = save_atlas(out / "atlas.dlab", atlas)
    diag = {
        "partition_of_unity_error": pou,
        "dyadic_reconstruction_error": lp,
        "unit_reconstruction_error": wiener,
        "atlas_pieces": len(atlas),
        "atlas_residual": atlas.residual,
        "datum_norm": f.norm(),
    }
    checks = {
        "partition_of_unity": pou <= 1e-12,
        "dyadic_reconstruction": lp <= 1e-10,
        "unit_reconstruction": wiener <= 1e-10,
    }
    return _Outcome(diag, {"shells": (rows, "dyadic shell norm |P_M f|_2")}, checks, [path])


def _randomize(cfg: ExperimentConfig, out: Path) -> _Outcome:
    grid = build_grid(cfg)
    fam = _family(cfg)
    rows, krows = [], []
    ratios = []
    kh_ok = True
    for i in range(cfg.corpus):
        f = build_datum(cfg, grid, i)
        atlas = build_atlas(f, build_truncation(cfg), d_param=cfg.d_param)
        rep = hs_stability_check(f, cfg.s, fam, cfg.trials, atlas=atlas)
        ratios.append(rep.ratio)
        rows.append(
            {
                "datum": i,
                "s": cfg.s,
                "ratio": rep.ratio,
                "stderr": rep.stderr,
                "hs_norm": rep.hs_norm,
                "truncated_ratio": rep.truncated_ratio,
                "pieces": len(atlas),
                "residual": atlas.residual,
            }
        )
        if cfg.family != "ones" and len(atlas):
            trials = max(cfg.trials, min_trials(max(cfg.betas)))
            for mr in khintchine_check(atlas.piece_norms, fam, list(cfg.betas), trials, draw_index=i):
                krows.append({"datum": i, "beta": mr.beta, "ratio": mr.ratio, "stderr": mr.stderr, "trials": mr.trials})
                if fam.distribution == "rademacher":
                    kh_ok &= mr.ratio <= 1.2
    diag = {"max_ratio": max(ratios), "corpus": cfg.corpus, "family": cfg.family, "subgaussian_constant": fam.subgaussian_constant}
    checks = {"hs_ratio_below_10": max(ratios) < 10.0, "khintchine_below_1_2": bool(kh_ok)}
    tables = {
        "hs_stability": (rows, "randomized H^s stability ratio"),
        "khintchine": (krows, "moment ratio |sum c X|_beta / (sqrt(beta) |c|_2)"),
    }
    return _Outcome(diag, tables, checks)


def _evolve_kind(cfg: ExperimentConfig, out: Path) -> _Outcome:
    grid = build_grid(cfg)
    traj, forcing, reg = _evolve(cfg, grid)
    path = save_trajectory(out / "trajectory.dlab", traj)
    mass = mass_check(traj, forcing)
    diag = {
        "snapshots": len(traj),
        "mass_drift": mass["drift"],
        "energy_n_drift": energy_drift(traj, reg),
        "duhamel_residual": duhamel_residual(traj, forcing, reg) if len(traj) >= 5 else math.nan,
        "max_amplitude": float(np.abs(traj.states).max()),
    }
    _, curve = extract_scattering_state(traj, forcing, reg)
    rows = [{"T1": a, "T2": b, "distance": c} for a, b, c in curve]
    checks = {"mass_drift": diag["mass_drift"] < 1e-8}
    if forcing.is_zero:
        checks["energy_drift"] = diag["energy_n_drift"] < 1e-6
    return _Outcome(diag, {"profile_curve": (rows, "H-dot^1 distance of consecutive free profiles")}, checks, [path])


def _norms(cfg: ExperimentConfig, out: Path, trajectory: str | None = None, specs=None) -> _Outcome:
    source = trajectory or cfg.trajectory
    if source:
        traj = load_trajectory(source)
    else:
        traj, _, _ = _evolve(cfg, build_grid(cfg))
    names = list(specs) if specs else list(cfg.norms)
    rows = []
    for name in names:
        spec = make_spec(name, cfg.d_param, sigma=cfg.sigma)
        rows.append({"norm": name, "value": spacetime_norm(traj, spec), "time_divisibility_alpha": spec.alpha})
    diag = {r["norm"]: r["value"] for r in rows}
    diag["snapshots"] = len(traj)
    checks = {f"{r['norm']}_finite": math.isfinite(r["value"]) for r in rows}
    return _Outcome(diag, {"norms": (rows, "discrete space-time norm")}, checks)


def _montecarlo(cfg: ExperimentConfig, out: Path, workers: int) -> _Outcome:
    grid = build_grid(cfg)
    f = build_datum(cfg, grid)
    fam = _family(cfg)
    exp = RandomizedStrichartz(
        f,
        cfg.s,
        cfg.strichartz_q,
        cfg.strichartz_p,
        cfg.strichartz_p0,
        fam,
        window=cfg.window,
        snapshots=cfg.snapshots,
        truncation=build_truncation(cfg),
    )
    atlas = exp.atlas

    def task(i: int) -> dict:
        draws = fam.sample(len(atlas), i)
        spec = atlas.assemble_spectral(draws)
        return {"besov": exp.draw(i), "hs2": sobolev_norm(spec, grid, cfg.s, homogeneous=True) ** 2}

    summary = montecarlo_schedule(task, cfg.trials, workers)
    rows = summary.rows()
    per_draw = [
        {"draw": i, **{n: float(summary.values[n][i]) for n in summary.names}} for i in range(summary.tasks)
    ]
    diag = {
        "trials": summary.tasks,
        "succeeded": summary.count,
        "pieces": len(atlas),
        "hs_norm": exp.hs_norm,
        "gain": exp.gain,
        "regularity": exp.regularity,
    }
    if summary.count:
        vals = summary.values["besov"][~np.isnan(summary.values["besov"])]
        for b in cfg.betas:
            m = float(np.mean(vals**b) ** (1.0 / b))
            diag[f"normalized_moment_beta{b}"] = m / exp.hs_norm / math.sqrt(b)
        diag["hs_ratio"] = math.sqrt(summary.mean("hs2")) / exp.hs_norm
    checks = {
        "no_failed_draws": summary.ok,
        "normalized_moments_below_10": all(v < 10 for k, v in diag.items() if k.startswith("normalized_moment")),
    }
    tables = {
        "summary": (rows, "per-draw Besov norm of the randomized free evolution (summary)"),
        "draws": (per_draw, "per-draw Besov norm of the randomized free evolution"),
    }
    return _Outcome(diag, tables, checks, failed=summary.failed)


def _energy_audit(cfg: ExperimentConfig, out: Path) -> _Outcome:
    grid = build_grid(cfg)
    traj, forcing, reg = _evolve(cfg, grid)
    rep = increment_decomposition(traj, forcing, reg, cfg.audit_t1, cfg.audit_t2)
    mass = mass_check(traj, forcing)
    diag = {
        "residual": rep.residual,
        "lhs": rep.lhs,
        "mass_drift": mass["drift"],
        "eta": cfg.eta,
        "delta": cfg.delta,
        "sigma": cfg.sigma,
    }
    tables = {"increment": ([rep.as_dict()], "energy increment identity terms")}
    try:
        boot = bootstrap_report(traj, forcing, reg, cfg.eta, cfg.sigma)
        diag["bootstrap_constant"] = boot.constant
        diag["bootstrap_intervals"] = len(boot.intervals)
        brow = [
            {"T_start": a, "T_end": b, "sup_energy": s, "start_energy": e0, "forcing_z": fz, "ratio": r}
            for (a, b), s, e0, fz, r in zip(boot.intervals, boot.sup_energy, boot.start_energy, boot.forcing_norm, boot.ratios)
        ]
        tables["bootstrap"] = (brow, "per-interval energy bootstrap ratio")
    except ValueError as exc:
        diag["bootstrap_constant"] = math.nan
        diag["bootstrap_error"] = str(exc)
    checks = {"identity_residual": abs(rep.residual) < cfg.audit_tol, "mass_drift": mass["drift"] < 1e-8}
    return _Outcome(diag, tables, checks)


def _perturb(cfg: ExperimentConfig, out: Path) -> _Outcome:
    grid = build_grid(cfg)
    amp = cfg.forcing_amplitude if cfg.forcing_amplitude > 0 else 1.0
    forcing = build_forcing(cfg, grid, amp)
    sweep = [0.0] + [e for e in cfg.eps if e != 0.0]
    try:
        rep = perturbation_experiment(
            build_datum(cfg, grid),
            forcing.datum,
            sweep,
            (cfg.t0, cfg.t1),
            build_reg(cfg),
            cfg.dt,
            cfg.stride,
            cfg.smallness,
            cfg.forcing_truncation,
        )
    except SmallnessError as exc:
        raise RunError(str(exc)) from exc
    rows = [
        {"eps": e, "wdot": w, "x": x, "x_bound": it["rhs"], "interpolation_holds": it["holds"]}
        for e, w, x, it in zip(rep.eps, rep.wdot, rep.x, rep.interpolation)
    ]
    nonzero = [(e, w) for e, w in zip(rep.eps, rep.wdot) if e != 0.0]
    nonzero.sort(reverse=True)
    decreasing = all(b[1] < a[1] for a, b in zip(nonzero, nonzero[1:]))
    diag = {"base_wdot": rep.base_wdot, "zero_distance": rep.wdot[0], "d_param": rep.d_param}
    checks = {
        "zero_at_eps_0": rep.wdot[0] == 0.0,
        "strictly_decreasing": decreasing,
        "interpolation_holds": rep.interpolation_holds,
    }
    return _Outcome(diag, {"perturbation": (rows, "forced minus unforced distance")}, checks)


# ---- entry -----------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(
    cfg: ExperimentConfig, workers: int | None = None, trajectory: str | None = None, specs=None
) -> RunManifest:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise RunError(f"output directory {out} is not writable: {exc}") from exc
    workers = cfg.workers if workers is None else workers
    start = time.perf_counter()
    kind = cfg.kind
    if kind == "decompose":
        res = _decompose(cfg, out)
    elif kind == "randomize":
        res = _randomize(cfg, out)
    elif kind == "evolve":
        res = _evolve_kind(cfg, out)
    elif kind == "norms":
        res = _norms(cfg, out, trajectory, specs)
    elif kind == "montecarlo":
        res = _montecarlo(cfg, out, workers)
    elif kind == "energy_audit":
        res = _energy_audit(cfg, out)
    else:
        res = _perturb(cfg, out)

    artifacts = {}
    nan_flags = []
    report = {"kind": kind, "seed": cfg.seed, "diagnostics": res.diagnostics, "checks": res.checks}
    if res.failed:
        report["failed_draws"] = [{"index": i, "error": m} for i, m in res.failed]
    if json_has_nan(res.diagnostics):
        nan_flags.append("report.json")
    p = write_json(out / "report.json", report)
    artifacts[p.name] = _sha256(p)
    for stem, (rows, quantity) in sorted(res.tables.items()):
        p = write_csv(out / f"{stem}.csv", rows, quantity=quantity)
        artifacts[p.name] = _sha256(p)
        if has_nan(rows):
            nan_flags.append(p.name)
    for path in res.extra:
        artifacts[Path(path).name] = _sha256(Path(path))
    manifest = RunManifest(
        cfg.as_dict(),
        dict(sorted(artifacts.items())),
        time.perf_counter() - start,
        res.diagnostics,
        res.checks,
        nan_flags,
        res.failed,
    )
    write_json(out / "manifest.json", manifest.as_dict())
    return manifest
