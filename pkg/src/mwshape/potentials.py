"""Parameterized time-dependent potentials, evaluated in uK.

Every family is a frozen dataclass with an ``evaluate(x, t)`` method and a
flat view of its scalar parameters (``parameter_names``), so the optimizer
can move a subset of them without knowing the family.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import ContractError, DomainError, Grid1D


def envelope(t, t0: float, tau: float):
    """Super-Gaussian switching window exp(-((t - t0)/tau)^4)."""
    return np.exp(-(((t - t0) / tau) ** 4))


@dataclass(frozen=True)
class FixedCenter:
    x_c: float


@dataclass(frozen=True)
class MovingCenter:
    """Centre ``x0 + v t``; ``v_cm`` in cm/s."""

    x0: float
    v_cm: float


Center = Union[FixedCenter, MovingCenter]


def _center_position(center: Center, t):
    if isinstance(center, FixedCenter):
        return center.x_c
    return center.x0 + center.v_cm * 1e-2 * t


class _Family:
    """Shared parameter plumbing for flat dataclass families."""

    def _flat(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (FixedCenter, MovingCenter)):
                out.update(dataclasses.asdict(v))
            else:
                out[f.name] = float(v)
        return out

    def _rebuild(self, values: dict):
        kw = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (FixedCenter, MovingCenter)):
                kw[f.name] = type(v)(**{c.name: values[c.name] for c in dataclasses.fields(v)})
            else:
                kw[f.name] = values[f.name]
        return type(self)(**kw)

    @property
    def parameter_names(self) -> tuple:
        return tuple(self._flat())

    def evaluate_on(self, grid: Grid1D, t: float) -> np.ndarray:
        return self.evaluate(grid.x, t)


@dataclass(frozen=True)
class CosineWell(_Family):
    """cos^2 well (phi=0) or barrier (phi=pi/2) inside ``|x - x_c| <= sigma_x/2``.

    Outside the window the value is ``-V0 sin^2(phi)`` with no time envelope.
    """

    V0: float
    t0: float
    tau: float
    sigma_x: float
    phi: float = 0.0
    center: Center = FixedCenter(0.0)

    def __post_init__(self):
        if self.V0 < 0 or self.tau <= 0 or self.sigma_x <= 0:
            raise DomainError(f"invalid CosineWell parameters: {self}")

    def envelope(self, t):
        return envelope(t, self.t0, self.tau)

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        y = x - _center_position(self.center, t)
        out = np.full(np.shape(x), -self.V0 * np.sin(self.phi) ** 2)
        inside = np.abs(y) <= 0.5 * self.sigma_x
        amp = self.V0 * self.envelope(t)
        out[inside] = -amp * np.cos(np.pi * y[inside] / self.sigma_x + self.phi) ** 2
        return out


@dataclass(frozen=True)
class MovingBarrier(_Family):
    """sin^2 barrier whose window starts at ``x0 + slope * v_ref * t``.

    The crest (V=0) sits half a window ahead of that rear edge. The envelope
    multiplies the whole potential, including the flat ``-V0`` outside, so
    the potential vanishes identically when switched off.
    """

    V0: float
    t0: float
    tau: float
    sigma_x: float
    x0: float
    slope: float
    v_ref_cm: float = 10.0

    def __post_init__(self):
        if self.V0 < 0 or self.tau <= 0 or self.sigma_x <= 0:
            raise DomainError(f"invalid MovingBarrier parameters: {self}")

    def envelope(self, t):
        return envelope(t, self.t0, self.tau)

    def crest(self, t):
        return self.x0 + 0.5 * self.sigma_x + self.slope * self.v_ref_cm * 1e-2 * t

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        amp = self.V0 * self.envelope(t)
        y = x - self.crest(t)
        out = np.full(np.shape(x), -amp)
        inside = np.abs(y) <= 0.5 * self.sigma_x
        out[inside] = -amp * np.sin(np.pi * y[inside] / self.sigma_x) ** 2
        return out


@dataclass(frozen=True)
class TriangleSplitter(_Family):
    """Tent barrier riding with the packet at ``v_cm``; ``-V0`` outside."""

    V0: float
    t0: float
    tau: float
    sigma_x: float
    v_cm: float = 10.0

    def __post_init__(self):
        if self.V0 < 0 or self.tau <= 0 or self.sigma_x <= 0:
            raise DomainError(f"invalid TriangleSplitter parameters: {self}")

    def envelope(self, t):
        return envelope(t, self.t0, self.tau)

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        y = np.abs(x - self.v_cm * 1e-2 * t)
        out = np.full(np.shape(x), -self.V0)
        inside = y <= 0.5 * self.sigma_x
        out[inside] = -2 * self.V0 * self.envelope(t) * y[inside] / self.sigma_x
        return out


@dataclass(frozen=True)
class TwoRampSplitter(_Family):
    """max(ramp1 + ramp2, 0); the second ramp is switched at ``t0 + 2 tau``."""

    V0: float
    t0: float
    tau: float
    sigma: float
    v_cm: float
    x1: float
    v2: float
    x2: float

    def __post_init__(self):
        if self.V0 < 0 or self.tau <= 0 or self.sigma <= 0:
            raise DomainError(f"invalid TwoRampSplitter parameters: {self}")

    def envelope(self, t):
        return max(envelope(t, self.t0, self.tau), envelope(t, self.t0 + 2 * self.tau, self.tau))

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        c1 = self.v_cm * 1e-2 * t + self.x1
        c2 = self.v2 * 1e-2 * t + self.x2
        a = self.V0 * envelope(t, self.t0, self.tau) * (1 - np.abs(x - c1) / self.sigma)
        b = self.V0 * envelope(t, self.t0 + 2 * self.tau, self.tau) * (1 - np.abs(x - c2) / self.sigma)
        return np.maximum(a + b, 0.0)


@dataclass(frozen=True)
class ParabolicWall(_Family):
    """Static half-parabola ``curvature/2 (x - x_b)^2`` for ``x > x_b``."""

    x_b: float
    curvature: float

    def __post_init__(self):
        if self.curvature <= 0:
            raise DomainError(f"curvature must be positive, got {self.curvature}")

    def envelope(self, t):
        return 1.0

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        d = np.maximum(np.asarray(x, dtype=float) - self.x_b, 0.0)
        return 0.5 * self.curvature * d * d


@dataclass(frozen=True)
class Harmonic(_Family):
    """Static ``curvature/2 (x - x_c)^2``; used for ground states and tests."""

    curvature: float
    x_c: float = 0.0

    def envelope(self, t):
        return 1.0

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.x_c
        return 0.5 * self.curvature * d * d


@dataclass(frozen=True)
class Constant(_Family):
    value: float = 0.0

    def envelope(self, t):
        return 0.0

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        return np.full(np.shape(x), float(self.value))


@dataclass(frozen=True)
class Composite:
    """Pointwise sum of parts; parameters are named ``"<index>.<name>"``."""

    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        out = np.zeros(np.shape(x))
        for p in self.parts:
            out = out + p.evaluate(x, t)
        return out

    def evaluate_on(self, grid: Grid1D, t: float) -> np.ndarray:
        return self.evaluate(grid.x, t)

    def envelope(self, t):
        return max(p.envelope(t) for p in self.parts)

    def _flat(self) -> dict:
        return {f"{i}.{k}": v for i, p in enumerate(self.parts) for k, v in p._flat().items()}

    def _rebuild(self, values: dict):
        parts = []
        for i, p in enumerate(self.parts):
            prefix = f"{i}."
            parts.append(p._rebuild({k[len(prefix):]: v for k, v in values.items() if k.startswith(prefix)}))
        return Composite(tuple(parts))

    @property
    def parameter_names(self) -> tuple:
        return tuple(self._flat())


PotentialSpec = Union[
    CosineWell, MovingBarrier, TriangleSplitter, TwoRampSplitter, ParabolicWall, Harmonic, Constant, Composite
]

FAMILIES = {
    "cosine_well": CosineWell,
    "moving_barrier": MovingBarrier,
    "triangle_splitter": TriangleSplitter,
    "two_ramp_splitter": TwoRampSplitter,
    "parabolic_wall": ParabolicWall,
    "harmonic": Harmonic,
    "constant": Constant,
}


def evaluate(spec: PotentialSpec, grid: Grid1D, t: float) -> np.ndarray:
    """Potential in uK on ``grid`` at time ``t``."""
    if not np.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    return spec.evaluate(grid.x, t)


def parameter_names(spec: PotentialSpec) -> tuple:
    return spec.parameter_names


def _resolve_mask(spec: PotentialSpec, mask) -> list:
    names = list(spec.parameter_names)
    if mask is None:
        return names
    mask = list(mask)
    if mask and all(isinstance(m, (bool, np.bool_)) for m in mask):
        if len(mask) != len(names):
            raise ContractError(f"boolean mask has length {len(mask)}, family has {len(names)} parameters")
        return [n for n, m in zip(names, mask) if m]
    unknown = [m for m in mask if m not in names]
    if unknown:
        raise ContractError(f"unknown parameter(s) {unknown}; available: {names}")
    return mask


def parameter_vector(spec: PotentialSpec, mask: Sequence | None = None) -> np.ndarray:
    """Values of the parameters selected by ``mask`` (names or booleans), in mask order."""
    flat = spec._flat()
    return np.array([flat[n] for n in _resolve_mask(spec, mask)], dtype=float)


def with_parameters(spec: PotentialSpec, vector, mask: Sequence | None = None) -> PotentialSpec:
    names = _resolve_mask(spec, mask)
    vector = np.atleast_1d(np.asarray(vector, dtype=float))
    if vector.shape != (len(names),):
        raise ContractError(f"expected {len(names)} values for {names}, got shape {vector.shape}")
    flat = spec._flat()
    for n, v in zip(names, vector):
        flat[n] = float(v)
    return spec._rebuild(flat)


def to_dict(spec: PotentialSpec) -> dict:
    """Serializable description with unit-suffixed keys left to the caller."""
    if isinstance(spec, Composite):
        return {"family": "composite", "parts": [to_dict(p) for p in spec.parts]}
    family = next(k for k, v in FAMILIES.items() if isinstance(spec, v))
    d = {"family": family}
    d.update(spec._flat())
    if isinstance(spec, CosineWell):
        d["center"] = "moving" if isinstance(spec.center, MovingCenter) else "fixed"
    return d


def from_dict(d: dict) -> PotentialSpec:
    d = dict(d)
    family = d.pop("family")
    if family == "composite":
        return Composite(tuple(from_dict(p) for p in d["parts"]))
    if family not in FAMILIES:
        raise ContractError(f"unknown potential family {family!r}; known: {sorted(FAMILIES)}")
    if family == "cosine_well":
        kind = d.pop("center", "moving" if "x0" in d else "fixed")
        if kind == "moving":
            center = MovingCenter(float(d.pop("x0")), float(d.pop("v_cm")))
        else:
            center = FixedCenter(float(d.pop("x_c")))
        return CosineWell(center=center, **{k: float(v) for k, v in d.items()})
    return FAMILIES[family](**{k: float(v) for k, v in d.items()})
