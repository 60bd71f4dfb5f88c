"""Flat ``key = value`` run configuration with units in the key names.

Example::

    task = focus
    model = tdse
    potential.V0_uK = 97.73
    free = V0, t0, tau
    bounds.V0_uK = 10, 100
    prop.t_end_us = 450

Keys absent from the file keep the task preset's values. Unknown keys and
malformed values raise :class:`ConfigError` naming the key.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import potentials as pot
from . import tasks
from .core import ContractError, DomainError

MODELS = ("tdse", "tdgpe", "cylgpe")

# parameter name -> config key stem (unit suffix included)
PARAM_KEYS = {
    "V0": "V0_uK",
    "t0": "t0_us",
    "tau": "tau_us",
    "sigma_x": "sigma_x_um",
    "sigma": "sigma_um",
    "phi": "phi_rad",
    "x_c": "x_c_um",
    "x0": "x0_um",
    "v_cm": "v_cm_s",
    "slope": "slope",
    "v_ref_cm": "v_ref_cm_s",
    "x1": "x1_um",
    "v2": "v2_cm_s",
    "x2": "x2_um",
    "x_b": "x_b_um",
    "curvature": "curvature_uK_um2",
    "value": "value_uK",
}
KEY_PARAMS = {v: k for k, v in PARAM_KEYS.items()}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class OptimizerSettings:
    max_evals: int = 600
    restarts: int = 4
    step_fraction: float = 0.2
    simplex_scale: float = 0.05
    ftol: float = 1e-5
    xtol: float = 1e-3
    start: str = "preset"


@dataclass
class RunConfig:
    task: tasks.TaskPreset
    model: str = "tdse"
    seed: int = 0
    resolution: Optional[str] = None
    density_cm3: Optional[float] = None
    n_atoms: float = 1000.0
    omega_trans_Hz: float = 400.0
    n_radial: int = 128
    r_max_aho: float = 6.0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    sensitivity_fraction: float = 0.01
    sweep_densities: tuple = (1e12, 1e13, 3e13, 1e14, 3e14, 1e15, 3e15, 1e16)
    max_times: int = 500
    max_cells: int = 1000
    full_snapshots: bool = False
    raw: dict = field(default_factory=dict)

    def gpe_density(self) -> float:
        """Peak density used by the 1D mean-field model (0 for tdse)."""
        if self.model == "tdse":
            return 0.0
        return self.task.gpe_density_cm3 if self.density_cm3 is None else self.density_cm3


def parse_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load(path: Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text, str(path))


def _float(key, v) -> float:
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{key}: value must be finite, got {v!r}")
    return x


def _int(key, v) -> int:
    x = _float(key, v)
    if x != int(x):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return int(x)


def _bool(key, v) -> bool:
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {v!r}")


def _list(key, v) -> list:
    return [s.strip() for s in str(v).split(",") if s.strip()]


def _choice(key, v, options):
    if v not in options:
        raise ConfigError(f"{key}: expected one of {list(options)}, got {v!r}")
    return v


def _param_from_key(key: str, stem_prefix: str) -> tuple:
    """('potential.0.V0_uK', 'potential.') -> ('0.V0', 'V0_uK')."""
    rest = key[len(stem_prefix):]
    head, _, last = rest.rpartition(".")
    if last not in KEY_PARAMS:
        raise ConfigError(f"unknown key {key!r}; parameter keys are {sorted(KEY_PARAMS)}")
    name = KEY_PARAMS[last]
    return (f"{head}.{name}" if head else name), last


def _potential_from_keys(keys: dict) -> object:
    """Build a fresh potential when ``potential.family`` is given."""
    family = keys.pop("potential.family")
    if family == "composite":
        idx = sorted({k.split(".")[1] for k in keys if k.startswith("potential.") and k.split(".")[1].isdigit()},
                     key=int)
        parts = []
        for i in idx:
            prefix = f"potential.{i}."
            sub = {k[len(prefix):]: keys.pop(k) for k in list(keys) if k.startswith(prefix)}
            sub = {("potential." + k): v for k, v in sub.items()}
            try:
                parts.append(_potential_from_keys(sub))
            except ConfigError as exc:
                raise ConfigError(str(exc).replace("potential.", prefix, 1)) from None
        if not parts:
            raise ConfigError("potential.family = composite needs potential.<i>.family entries")
        return pot.Composite(tuple(parts))
    if family not in pot.FAMILIES:
        raise ConfigError(f"potential.family: unknown family {family!r}; known: {sorted(pot.FAMILIES) + ['composite']}")
    d = {"family": family}
    for k in list(keys):
        if k.startswith("potential."):
            name, _ = _param_from_key(k, "potential.")
            d[name] = _float(k, keys.pop(k))
    if family == "cosine_well":
        d["center"] = "moving" if "x0" in d else "fixed"
    try:
        return pot.from_dict(d)
    except TypeError as exc:
        raise ConfigError(f"potential.*: incomplete {family} parameters ({exc})") from None
    except (DomainError, ContractError) as exc:
        raise ConfigError(f"potential.*: {exc}") from None


def build(raw: dict, overrides: Optional[dict] = None) -> RunConfig:
    """Validate ``raw`` (plus ``overrides``) against the schema."""
    keys = dict(raw)
    keys.update(overrides or {})
    echo = dict(keys)
    if "task" not in keys:
        raise ConfigError("task: missing required key (one of " + ", ".join(tasks.TASKS) + ")")
    task_name = _choice("task", keys.pop("task"), tasks.TASKS)
    task = tasks.preset(task_name)
    cfg = RunConfig(task=task, raw=echo)

    if "model" in keys:
        cfg.model = _choice("model", keys.pop("model"), MODELS)
    if "seed" in keys:
        cfg.seed = _int("seed", keys.pop("seed"))
    if "resolution" in keys:
        cfg.resolution = _choice("resolution", keys.pop("resolution"), ("search", "full"))

    # potential
    potential = task.potential
    if "potential.family" in keys:
        potential = _potential_from_keys(keys)
    values = {}
    for k in [k for k in keys if k.startswith("potential.")]:
        name, _ = _param_from_key(k, "potential.")
        if name not in potential.parameter_names:
            raise ConfigError(f"unknown key {k!r}: the potential has parameters {list(potential.parameter_names)}")
        values[name] = _float(k, keys.pop(k))
    if values:
        names = list(values)
        try:
            potential = pot.with_parameters(potential, [values[n] for n in names], names)
        except (DomainError, ContractError) as exc:
            raise ConfigError(f"potential.*: {exc}") from None

    free = task.free
    if "free" in keys:
        free = tuple(_list("free", keys.pop("free")))
        unknown = [n for n in free if n not in potential.parameter_names]
        if unknown:
            raise ConfigError(f"free: unknown parameter(s) {unknown}; available {list(potential.parameter_names)}")
    bounds = {n: b for n, b in task.bounds.items() if n in potential.parameter_names}
    for k in [k for k in keys if k.startswith("bounds.")]:
        name, _ = _param_from_key(k, "bounds.")
        pair = _list(k, keys.pop(k))
        if len(pair) != 2:
            raise ConfigError(f"{k}: expected 'lo, hi', got {pair}")
        lo, hi = _float(k, pair[0]), _float(k, pair[1])
        if not lo < hi:
            raise ConfigError(f"{k}: lower bound {lo} must be below upper bound {hi}")
        bounds[name] = (lo, hi)
    missing = [n for n in free if n not in bounds]
    if missing:
        raise ConfigError(f"bounds: no bounds for free parameter(s) {missing}")

    res_name = cfg.resolution or "full"
    res = task.resolution(res_name)
    grid_keys = {"grid.x_min_um": "x_min", "grid.x_max_um": "x_max", "grid.n_points": "n_points",
                 "prop.dt_us": "dt", "prop.snapshot_every": "snapshot_every"}
    changes = {}
    for k, attr in grid_keys.items():
        if k in keys:
            conv = _int if attr in ("n_points", "snapshot_every") else _float
            changes[attr] = conv(k, keys.pop(k))
    if changes:
        res = dataclasses.replace(res, **changes)
        try:
            res.grid()
        except (DomainError, ContractError) as exc:
            raise ConfigError(f"grid.*: {exc}") from None
        if not res.dt > 0:
            raise ConfigError(f"prop.dt_us: must be positive, got {res.dt}")
        if res.snapshot_every < 1:
            raise ConfigError("prop.snapshot_every: must be >= 1")
    t_end = _float("prop.t_end_us", keys.pop("prop.t_end_us")) if "prop.t_end_us" in keys else task.t_end
    fwhm = _float("packet.fwhm_um", keys.pop("packet.fwhm_um")) if "packet.fwhm_um" in keys else task.fwhm_amplitude
    v_cm = _float("packet.v_cm_s", keys.pop("packet.v_cm_s")) if "packet.v_cm_s" in keys else task.v_cm
    if not fwhm > 0:
        raise ConfigError(f"packet.fwhm_um: must be positive, got {fwhm}")
    if not t_end > 0:
        raise ConfigError(f"prop.t_end_us: must be positive, got {t_end}")

    replace = {"potential": potential, "free": free, "bounds": bounds, "t_end": t_end,
               "fwhm_amplitude": fwhm, "v_cm": v_cm}
    if cfg.resolution is None and changes:
        # no resolution named: grid keys apply to search and full alike
        replace["full"] = res
        replace["search"] = dataclasses.replace(task.search, **changes)
    else:
        replace[res_name] = res
    cfg.task = dataclasses.replace(task, **replace)

    if "gpe.density_cm3" in keys:
        cfg.density_cm3 = _float("gpe.density_cm3", keys.pop("gpe.density_cm3"))
        if cfg.density_cm3 < 0:
            raise ConfigError("gpe.density_cm3: must be >= 0")
    for key, attr, conv in (
        ("gpe.n_atoms", "n_atoms", _float),
        ("gpe.omega_trans_Hz", "omega_trans_Hz", _float),
        ("cyl.n_radial", "n_radial", _int),
        ("cyl.r_max_aho", "r_max_aho", _float),
        ("sensitivity.fraction", "sensitivity_fraction", _float),
        ("output.max_times", "max_times", _int),
        ("output.max_cells", "max_cells", _int),
        ("output.full_snapshots", "full_snapshots", _bool),
    ):
        if key in keys:
            value = conv(key, keys.pop(key))
            if attr != "full_snapshots" and not value > 0:
                raise ConfigError(f"{key}: must be positive, got {value}")
            setattr(cfg, attr, value)
    if "sweep.densities_cm3" in keys:
        dens = tuple(_float("sweep.densities_cm3", v) for v in _list("sweep.densities_cm3", keys.pop("sweep.densities_cm3")))
        if not dens or any(d <= 0 for d in dens):
            raise ConfigError("sweep.densities_cm3: need a non-empty list of positive densities")
        cfg.sweep_densities = dens

    opt = cfg.optimizer
    for key, attr, conv in (
        ("optimizer.max_evals", "max_evals", _int),
        ("optimizer.restarts", "restarts", _int),
        ("optimizer.step_fraction", "step_fraction", _float),
        ("optimizer.simplex_scale", "simplex_scale", _float),
        ("optimizer.ftol", "ftol", _float),
        ("optimizer.xtol", "xtol", _float),
    ):
        if key in keys:
            value = conv(key, keys.pop(key))
            if value < 0 or (attr in ("max_evals", "simplex_scale") and value == 0):
                raise ConfigError(f"{key}: out of range ({value})")
            setattr(opt, attr, value)
    if "optimizer.start" in keys:
        opt.start = _choice("optimizer.start", keys.pop("optimizer.start"), ("preset", "center"))

    if keys:
        k = sorted(keys)[0]
        raise ConfigError(f"unknown key {k!r}")
    return cfg
