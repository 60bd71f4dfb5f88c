"""Command-line entry point.

Subcommands: propagate, optimize, sensitivity, sweep-density, ground-state.
Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from . import objectives as obj
from . import potentials as pot
from . import tasks
from .config import ConfigError, RunConfig, build, load, parse_text
from .core import UNITS, ContractError, DomainError, NumericalError, fwhm_to_sigma
from .cylgpe import CylGrid, cyl_ground_state, cyl_propagate
from .optimizer import OptimizationProblem, random_walk_restarts
from .propagator import (
    PropagationConfig,
    g1d_from_physical,
    harmonic_curvature_for_sigma,
    imaginary_time_ground_state,
    peak_density_cm3,
    propagate,
)
from .robustness import sensitivity

log = logging.getLogger("mwshape")


def _resolution(cfg: RunConfig, default: str) -> tasks.Resolution:
    return cfg.task.resolution(cfg.resolution or default)


def _echo(cfg: RunConfig, resolution: tasks.Resolution) -> dict:
    task = cfg.task
    return {
        "input": cfg.raw,
        "task": task.name,
        "model": cfg.model,
        "seed": cfg.seed,
        "potential": pot.to_dict(task.potential),
        "free": list(task.free),
        "bounds": {n: list(task.bounds[n]) for n in task.free},
        "resolution": dataclasses.asdict(resolution),
        "t_end_us": task.t_end,
        "gpe_density_cm3": cfg.gpe_density(),
    }


class _MapCollector:
    """Keeps a decimated, block-averaged record of density and momentum density."""

    def __init__(self, n_records: int, max_times: int, max_cells: int, full: bool):
        self.stride = max(1, math.ceil(n_records / max_times))
        self.n_records = n_records
        self.max_cells = max_cells
        self.full = full
        self.count = 0
        self.times, self.dens, self.mom, self.psis = [], [], [], []
        self.grid = None

    def __call__(self, wf, _obs):
        i = self.count
        self.count += 1
        if i % self.stride and i != self.n_records - 1:
            return
        self.grid = wf.grid
        self.times.append(wf.time)
        f = io.coarsening_factor(wf.grid.n_points, self.max_cells)
        self.dens.append(io.block_mean(wf.density(), f))
        self.mom.append(np.fft.fftshift(np.abs(wf.momentum_amplitudes()) ** 2))
        if self.full:
            self.psis.append(wf.amplitudes.copy())

    def write(self, out: Path) -> list:
        g = self.grid
        f = io.coarsening_factor(g.n_points, self.max_cells)
        x = io.block_mean(g.x, f)
        mom = np.array(self.mom)
        k = np.fft.fftshift(g.k)
        peak = mom.max(axis=0)
        sel = np.nonzero(peak > 1e-6 * peak.max())[0]
        lo, hi = sel[0], sel[-1] + 1
        pad = max(8, (hi - lo) // 10)
        lo, hi = max(0, lo - pad), min(g.n_points, hi + pad)
        fk = max(1, math.ceil((hi - lo) / self.max_cells))
        hi = lo + ((hi - lo) // fk) * fk
        files = [
            _save(out / "map_t_us.npy", np.array(self.times)),
            _save(out / "map_x_um.npy", x),
            _save(out / "density_map.npy", np.array(self.dens)),
            _save(out / "map_v_cm_s.npy", UNITS.k_to_velocity(io.block_mean(k[lo:hi], fk))),
            _save(out / "momentum_map.npy", io.block_mean(mom[:, lo:hi], fk, axis=1)),
        ]
        if self.full:
            files.append(_save(out / "snapshots_psi.npy", np.array(self.psis)))
        return files


def _save(path: Path, arr) -> Path:
    np.save(path, np.ascontiguousarray(arr), allow_pickle=False)
    return path


def _n_records(t_end: float, t0: float, dt: float, every: int) -> int:
    n = int(round((t_end - t0) / dt))
    return n // every + 1 + (1 if n % every else 0)


def _safe_cost(task, run):
    try:
        return tasks.score(task, run), None
    except DomainError as exc:
        return None, str(exc)


def cmd_propagate(cfg: RunConfig, out: Path) -> tuple:
    task = cfg.task
    res = _resolution(cfg, "full")
    files = []
    summary = {"task": task.name, "model": cfg.model}
    if cfg.model == "cylgpe":
        files += _propagate_cyl(cfg, res, out, summary)
        return files, summary

    collector = _MapCollector(_n_records(task.t_end, 0.0, res.dt, res.snapshot_every),
                              cfg.max_times, cfg.max_cells, cfg.full_snapshots)
    run = tasks.simulate(task, resolution=res, density_cm3=cfg.gpe_density(), on_snapshot=collector)
    traj = run.trajectory
    files.append(io.write_observables(out / "observables.tsv", traj))
    files += collector.write(out)
    cost, err = _safe_cost(task, run)
    t_min, dx_min = obj.focus_minimum(traj.times, traj.series("width_dx"))
    final = traj.observables[-1]
    summary.update({
        "cost": cost,
        "cost_error": err,
        "g1d_uK_um": run.g1d,
        "gpe_density_cm3": cfg.gpe_density(),
        "dx0_um": traj.observables[0].width_dx,
        "dx_min_um": dx_min,
        "t_min_us": t_min,
        "focus_factor": traj.observables[0].width_dx / dx_min,
        "final_mean_p_cm_s": final.mean_p,
        "final_Ekin_uK": final.kinetic_energy,
        "Ekin_ratio": final.kinetic_energy / traj.observables[0].kinetic_energy,
        "warnings": traj.warnings,
    })
    files.append(io.write_json(out / "summary.json", summary))
    return files, summary


def _propagate_cyl(cfg: RunConfig, res: tasks.Resolution, out: Path, summary: dict) -> list:
    task = cfg.task
    omega = 2 * np.pi * cfg.omega_trans_Hz
    grid = res.grid()
    coarse = grid.with_points(max(64, grid.n_points // 8))
    ground = cyl_ground_state(CylGrid.for_trap(coarse, omega, cfg.n_radial, cfg.r_max_aho), omega,
                              cfg.n_atoms, fwhm_amplitude=task.fwhm_amplitude)
    state = ground.resampled(grid).boosted(task.v_cm)
    pc = PropagationConfig(dt=res.dt, t_end=task.t_end, snapshot_every=res.snapshot_every)
    ctraj = cyl_propagate(state, task.potential, pc)
    a = ctraj.as_arrays()
    files = [io.write_table(out / "cyl_widths.tsv", ("t_us", "dx_long_um", "dx_trans_um", "norm"),
                            np.column_stack([a["times"], a["width_long"], a["width_trans"], a["norm"]]))]

    g1d = g1d_from_physical(cfg.n_atoms, omega)
    wf = tasks.initial_state(task, res)
    traj = propagate(wf, task.potential, dataclasses.replace(pc, g1d=g1d))
    files.append(io.write_observables(out / "observables.tsv", traj))
    t_c, dx_c = obj.focus_minimum(a["times"], a["width_long"])
    t_1, dx_1 = obj.focus_minimum(traj.times, traj.series("width_dx"))
    before = a["times"] <= t_c
    summary.update({
        "n_atoms": cfg.n_atoms,
        "omega_trans_Hz": cfg.omega_trans_Hz,
        "peak_density_cm3": ground.peak_density_cm3(),
        "g1d_uK_um": g1d,
        "dx_min_cyl_um": dx_c,
        "t_min_cyl_us": t_c,
        "dx_min_1d_um": dx_1,
        "t_min_1d_us": t_1,
        "trans_growth_before_focus": float(a["width_trans"][before].max() / a["width_trans"][0] - 1),
        "warnings": ctraj.warnings + traj.warnings,
    })
    files.append(io.write_json(out / "summary.json", summary))
    return files


def cmd_optimize(cfg: RunConfig, out: Path) -> tuple:
    task = cfg.task
    search = _resolution(cfg, "search")
    density = cfg.gpe_density()
    lo, hi = task.lower(), task.upper()
    x0 = np.clip(task.free_values(), lo, hi) if cfg.optimizer.start == "preset" else 0.5 * (lo + hi)

    def f(values):
        return tasks.score(task, tasks.simulate(task, values, search, density))

    problem = OptimizationProblem(f, x0, lo, hi, cfg.optimizer.max_evals, task.free)
    result = random_walk_restarts(problem, cfg.optimizer.restarts, cfg.optimizer.step_fraction, cfg.seed,
                                  cfg.optimizer.simplex_scale, cfg.optimizer.ftol,
                                  cfg.optimizer.xtol)
    full_cost = tasks.score(task, tasks.simulate(task, result.x, "full", density))
    names = list(task.free)
    rows = [list(x) + [fx] for x, fx in result.log]
    files = [io.write_table(out / "evaluation_log.tsv", names + ["cost"], rows)]
    summary = {
        "task": task.name,
        "names": names,
        "best": dict(zip(names, result.x.tolist())),
        "cost_search": result.fun,
        "cost_full": full_cost,
        "n_evals": result.n_evals,
        "n_restarts": result.n_restarts,
        "converged": result.converged,
        "seed": cfg.seed,
    }
    if not result.converged:
        log.warning("budget of %d evaluations exhausted before convergence", cfg.optimizer.max_evals)
    files.append(io.write_json(out / "optimization.json", summary))
    return files, summary


def write_sensitivity(path: Path, report) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("parameter\tvalue\tplus\tminus\tmean_abs_change_pct\n")
        for n, v in zip(report.names, report.nominal_values):
            fh.write(f"{n}\t{v:.12g}\t{report.plus[n]:.12g}\t{report.minus[n]:.12g}\t"
                     f"{report.mean_abs_change[n]:.12g}\n")
    return Path(path)


def read_sensitivity(path: Path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            out[parts[0]] = dict(zip(header[1:], map(float, parts[1:])))
    return out


def cmd_sensitivity(cfg: RunConfig, out: Path) -> tuple:
    task = cfg.task
    res = _resolution(cfg, "full")
    density = cfg.gpe_density()

    def metric(values):
        return tasks.metric(task, tasks.simulate(task, values, res, density))

    report = sensitivity(metric, task.free, task.free_values(), cfg.sensitivity_fraction)
    files = [write_sensitivity(out / "sensitivity.tsv", report)]
    summary = {
        "task": task.name,
        "nominal_metric": report.nominal_metric,
        "fraction": report.fraction,
        "plus": report.plus,
        "minus": report.minus,
        "mean_abs_change_pct": report.mean_abs_change,
        "failures": report.failures,
    }
    files.append(io.write_json(out / "sensitivity.json", summary))
    print(report.table(raw=task.name == "stop"))
    return files, summary


def cmd_sweep_density(cfg: RunConfig, out: Path) -> tuple:
    task = cfg.task
    res = _resolution(cfg, "full")
    rows = []
    for density in (0.0,) + tuple(cfg.sweep_densities):
        run = tasks.simulate(task, resolution=res, density_cm3=density)
        traj = run.trajectory
        t_min, dx_min = obj.focus_minimum(traj.times, traj.series("width_dx"))
        rows.append((density, dx_min, traj.observables[0].width_dx / dx_min, t_min))
        log.info("density %.3g cm^-3: dx_min %.5f um", density, dx_min)
    files = [io.write_table(out / "sweep.tsv", ("density_cm3", "dx_min_um", "focus_factor", "t_min_us"), rows)]
    base = rows[0][2]
    summary = {
        "baseline_focus_factor": base,
        "max_focus_factor": max(r[2] for r in rows[1:]),
        "enhanced_densities": [r[0] for r in rows[1:] if r[2] > base],
    }
    files.append(io.write_json(out / "sweep.json", summary))
    return files, summary


def cmd_ground_state(cfg: RunConfig, out: Path) -> tuple:
    task = cfg.task
    res = _resolution(cfg, "full")
    if cfg.model == "cylgpe":
        omega = 2 * np.pi * cfg.omega_trans_Hz
        grid = res.grid()
        coarse = grid.with_points(max(64, grid.n_points // 8))
        state, info = cyl_ground_state(CylGrid.for_trap(coarse, omega, cfg.n_radial, cfg.r_max_aho), omega,
                                       cfg.n_atoms, fwhm_amplitude=task.fwhm_amplitude, full_output=True)
        files = [io.write_table(out / "cyl_marginal.tsv", ("x_um", "density_per_um"),
                                np.column_stack([coarse.x, state.marginal()]))]
        summary = {
            "peak_density_cm3": info.peak_density_cm3,
            "chemical_potential_uK": info.chemical_potential_uK,
            "dx_long_um": state.width_long(),
            "dx_trans_um": state.width_trans(),
            "steps": info.steps,
        }
        files.append(io.write_json(out / "ground_state.json", summary))
        return files, summary

    grid = res.grid()
    sigma = fwhm_to_sigma(task.fwhm_amplitude)
    trap = pot.Harmonic(harmonic_curvature_for_sigma(sigma), 0.0)
    wf0 = tasks.initial_state(dataclasses.replace(task, v_cm=0.0), res)
    g1d = tasks.g1d_for(wf0, cfg.gpe_density())
    wf, info = imaginary_time_ground_state(trap, grid, 0.0, g1d, full_output=True)
    rho = wf.density()
    files = [io.write_table(out / "ground_state.tsv", ("x_um", "density_per_um"), np.column_stack([grid.x, rho]))]
    x = grid.x
    m = np.dot(rho, x) * grid.dx
    summary = {
        "trap_curvature_uK_um2": trap.curvature,
        "g1d_uK_um": g1d,
        "energy_uK": info.energy,
        "dx_um": float(np.sqrt(np.dot(rho, x * x) * grid.dx - m * m)),
        "peak_density_cm3": peak_density_cm3(g1d, float(rho.max())) if g1d else 0.0,
    }
    files.append(io.write_json(out / "ground_state.json", summary))
    return files, summary


COMMANDS = {
    "propagate": cmd_propagate,
    "optimize": cmd_optimize,
    "sensitivity": cmd_sensitivity,
    "sweep-density": cmd_sweep_density,
    "ground-state": cmd_ground_state,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mwshape", description="Matter-wave pulse shaping toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="key = value configuration file")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--resolution", choices=("search", "full"), default=None)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        raw = load(args.config) if args.config else {}
        overrides = parse_text("\n".join(args.set), "--set")
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.resolution is not None:
            overrides["resolution"] = args.resolution
        cfg = build(raw, overrides)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, ContractError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return 1

    started = time.time()
    try:
        files, _summary = COMMANDS[args.command](cfg, out)
    except (ConfigError, ContractError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, DomainError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 1

    default = "search" if args.command == "optimize" else "full"
    timing = {"started_unix": started, "wall_s": time.time() - started}
    io.write_manifest(out, files, _echo(cfg, _resolution(cfg, default)), __version__, timing)
    return 0


if __name__ == "__main__":
    sys.exit(main())
