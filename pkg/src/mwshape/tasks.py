"""Ready-made shaping tasks: potentials, free parameters, bounds and grids.

Each preset bundles the optimized potential for one task with the
resolutions used for search and for final scoring. ``simulate`` runs a
preset (optionally with new parameter values or a mean-field density) and
``make_objective`` turns it into a cost function of the free parameters.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import objectives as obj
from . import potentials as pot
from .core import UNITS, ContractError, Grid1D, WaveFunction, gaussian_packet
from .propagator import PropagationConfig, Trajectory, g1d_from_density, propagate


@dataclass(frozen=True)
class Resolution:
    x_min: float
    x_max: float
    n_points: int
    dt: float
    snapshot_every: int

    def grid(self) -> Grid1D:
        return Grid1D(self.x_min, self.x_max, self.n_points)


FULL = Resolution(-50.0, 150.0, 2**15, 0.05, 20)
SEARCH = Resolution(-50.0, 150.0, 2**14, 0.25, 4)
FOCUS_SEARCH = Resolution(-25.0, 55.0, 2**13, 0.25, 4)

# Wall onset tuned so the two halves recombine near 405 us.
WALL_X_B = 34.2
WALL_CURVATURE = 20.0


@dataclass(frozen=True)
class TaskPreset:
    name: str
    potential: object
    free: tuple
    bounds: dict
    t_end: float
    objective: obj.ObjectiveSpec
    full: Resolution = FULL
    search: Resolution = SEARCH
    v_cm: float = 10.0
    fwhm_amplitude: float = 10.0
    gpe_density_cm3: float = 1e15
    keep_states: bool = False
    notes: str = ""

    def resolution(self, which: str) -> Resolution:
        if which == "full":
            return self.full
        if which == "search":
            return self.search
        raise ContractError(f"resolution must be 'full' or 'search', got {which!r}")

    def free_values(self) -> np.ndarray:
        return pot.parameter_vector(self.potential, self.free)

    def lower(self) -> np.ndarray:
        return np.array([self.bounds[n][0] for n in self.free], dtype=float)

    def upper(self) -> np.ndarray:
        return np.array([self.bounds[n][1] for n in self.free], dtype=float)

    def with_values(self, values: Sequence[float]) -> "TaskPreset":
        return dataclasses.replace(self, potential=pot.with_parameters(self.potential, values, self.free))


def _focus() -> TaskPreset:
    return TaskPreset(
        name="focus",
        potential=pot.CosineWell(97.73, 203.4, 134.3, 50.0, 0.0, pot.FixedCenter(13.23)),
        free=("V0", "t0", "tau"),
        bounds={"V0": (10.0, 100.0), "t0": (50.0, 400.0), "tau": (30.0, 300.0)},
        t_end=450.0,
        objective=obj.ObjectiveSpec("focus", (0.0, 450.0)),
        search=FOCUS_SEARCH,
    )


def _accelerate() -> TaskPreset:
    return TaskPreset(
        name="accelerate",
        potential=pot.CosineWell(100.0, 32.5, 35.83, 34.03, 0.0, pot.FixedCenter(13.23)),
        free=("V0", "t0", "tau", "sigma_x"),
        bounds={"V0": (10.0, 100.0), "t0": (10.0, 150.0), "tau": (10.0, 150.0), "sigma_x": (10.0, 50.0)},
        t_end=200.0,
        objective=obj.ObjectiveSpec("accelerate", (0.0, 200.0), factor=2.0),
    )


def _reflect() -> TaskPreset:
    return TaskPreset(
        name="reflect",
        potential=pot.CosineWell(131.4, 284.9, 136.0, 31.93, 0.0, pot.FixedCenter(13.23)),
        free=("V0", "t0", "tau", "sigma_x"),
        bounds={"V0": (10.0, 150.0), "t0": (50.0, 400.0), "tau": (30.0, 250.0), "sigma_x": (10.0, 50.0)},
        t_end=700.0,
        objective=obj.ObjectiveSpec("reflect", (0.0, 700.0)),
    )


def _stop() -> TaskPreset:
    return TaskPreset(
        name="stop",
        potential=pot.MovingBarrier(100.0, 267.4, 103.5, 52.36, -0.2927, 0.4297, 10.0),
        free=("t0", "tau", "sigma_x", "x0", "slope"),
        bounds={
            "t0": (100.0, 400.0),
            "tau": (30.0, 200.0),
            "sigma_x": (20.0, 80.0),
            "x0": (-10.0, 10.0),
            "slope": (0.2, 0.8),
        },
        t_end=600.0,
        objective=obj.ObjectiveSpec("stop", (0.0, 600.0)),
        search=dataclasses.replace(SEARCH, dt=0.05, snapshot_every=20),
    )


def _split_two() -> TaskPreset:
    splitter = pot.TriangleSplitter(94.6, 189.0, 183.4, 82.2, 10.0)
    wall = pot.ParabolicWall(WALL_X_B, WALL_CURVATURE)
    return TaskPreset(
        name="split_two",
        potential=pot.Composite((splitter, wall)),
        free=("0.V0", "0.t0", "0.tau", "0.sigma_x"),
        bounds={"0.V0": (10.0, 150.0), "0.t0": (50.0, 400.0), "0.tau": (30.0, 300.0), "0.sigma_x": (20.0, 120.0)},
        t_end=520.0,
        objective=obj.ObjectiveSpec("split_two", (0.0, 520.0)),
        search=dataclasses.replace(FULL, snapshot_every=100),
        full=dataclasses.replace(FULL, snapshot_every=100),
        keep_states=True,
    )


def _split_three() -> TaskPreset:
    return TaskPreset(
        name="split_three",
        potential=pot.TwoRampSplitter(40.0, 90.0, 75.0, 20.0, 10.0, 3.207, 8.0, 1.778),
        free=("x1", "v2", "x2"),
        bounds={"x1": (-10.0, 10.0), "v2": (0.0, 15.0), "x2": (-10.0, 10.0)},
        t_end=400.0,
        objective=obj.ObjectiveSpec("split_three", (0.0, 400.0), eval_time=400.0),
        search=dataclasses.replace(FULL, snapshot_every=2000),
        full=dataclasses.replace(FULL, snapshot_every=2000),
    )


_BUILDERS = {
    "focus": _focus,
    "accelerate": _accelerate,
    "reflect": _reflect,
    "stop": _stop,
    "split_two": _split_two,
    "split_three": _split_three,
}

TASKS = tuple(_BUILDERS)


def preset(name: str) -> TaskPreset:
    if name not in _BUILDERS:
        raise ContractError(f"unknown task {name!r}; expected one of {list(_BUILDERS)}")
    return _BUILDERS[name]()


@dataclass
class RunResult:
    trajectory: Trajectory
    potential: object
    initial: WaveFunction
    g1d: float
    resolution: Resolution = field(default=None)


def initial_state(task: TaskPreset, res: Resolution) -> WaveFunction:
    return gaussian_packet(res.grid(), task.fwhm_amplitude, task.v_cm)


def g1d_for(initial: WaveFunction, density_cm3: float) -> float:
    """Coupling (uK*um) that gives ``density_cm3`` at the packet's peak."""
    if density_cm3 == 0:
        return 0.0
    return g1d_from_density(density_cm3, float(initial.density().max()))


def simulate(
    task: TaskPreset,
    values: Optional[Sequence[float]] = None,
    resolution: str | Resolution = "full",
    density_cm3: float = 0.0,
    t_end: Optional[float] = None,
    keep_states: Optional[bool] = None,
    snapshot_every: Optional[int] = None,
    on_snapshot: Optional[Callable] = None,
) -> RunResult:
    """Propagate the task's initial packet under its (possibly re-valued) potential."""
    res = resolution if isinstance(resolution, Resolution) else task.resolution(resolution)
    potential = task.potential if values is None else pot.with_parameters(task.potential, values, task.free)
    wf = initial_state(task, res)
    g1d = g1d_for(wf, density_cm3)
    cfg = PropagationConfig(
        dt=res.dt,
        t_end=task.t_end if t_end is None else t_end,
        snapshot_every=res.snapshot_every if snapshot_every is None else snapshot_every,
        g1d=g1d,
        keep_states=task.keep_states if keep_states is None else keep_states,
    )
    traj = propagate(wf, potential, cfg, UNITS, on_snapshot=on_snapshot)
    return RunResult(traj, potential, wf, g1d, res)


def score(task: TaskPreset, run: RunResult) -> float:
    return obj.evaluate_objective(task.objective, run.trajectory, run.potential)


def metric(task: TaskPreset, run: RunResult) -> float:
    """The quantity whose +-1% response the robustness tables report.

    focus: minimal width (um); accelerate and reflect: final mean velocity
    (cm/s); stop: remaining kinetic energy (percent of initial); split
    tasks: their cost.
    """
    traj = run.trajectory
    if task.name == "focus":
        return obj.cost_focus(traj)
    if task.name in ("accelerate", "reflect"):
        return float(traj.observables[-1].mean_p)
    if task.name == "stop":
        return 100.0 * obj.cost_stop(traj, run.potential)
    return score(task, run)


def make_objective(task: TaskPreset, resolution: str = "search", density_cm3: float = 0.0) -> Callable:
    """Cost as a function of the free-parameter vector."""

    def f(values):
        return score(task, simulate(task, values, resolution, density_cm3))

    return f


def make_metric(task: TaskPreset, resolution: str = "full", density_cm3: float = 0.0) -> Callable:
    def f(values):
        return metric(task, simulate(task, values, resolution, density_cm3))

    return f
