"""Split-step propagation of the 1D Schrodinger and Gross-Pitaevskii equations."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .core import (
    CONSTANTS,
    UNITS,
    Constants,
    DomainError,
    Grid1D,
    NumericalError,
    Observables,
    UnitSystem,
    WaveFunction,
    observables,
)


@dataclass(frozen=True)
class PropagationConfig:
    """Time stepping and model settings.

    ``g1d`` is the 1D interaction strength in uK*um (0 gives the linear
    Schrodinger equation). ``absorb_width`` > 0 enables a cosine-ramp
    amplitude mask of that width (um) at both grid edges.
    """

    dt: float = 0.05
    t_end: float = 600.0
    snapshot_every: int = 20
    g1d: float = 0.0
    absorb_width: float = 0.0
    absorb_strength: float = 1.0
    keep_states: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if int(self.snapshot_every) < 1:
            raise DomainError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if self.g1d < 0:
            raise DomainError(f"g1d must be >= 0 (repulsive), got {self.g1d}")
        if self.absorb_width < 0:
            raise DomainError("absorb_width must be >= 0")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    observables: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final: Optional[WaveFunction] = None
    absorbed_norm: float = 0.0
    warnings: list = field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        """One observable as an array over snapshot times."""
        return np.array([getattr(o, name) for o in self.observables])

    def state_at(self, t: float, atol: float = 1e-9) -> WaveFunction:
        candidates = list(self.snapshots)
        if self.final is not None:
            candidates.append(self.final)
        for wf in candidates:
            if abs(wf.time - t) <= atol:
                return wf
        raise DomainError(f"no stored state at t={t} us")


def interaction_energy_uK(density_cm3: float, constants: Constants = CONSTANTS) -> float:
    """Mean-field energy 4 pi hbar^2 a_s n / m at 3D density ``n`` (cm^-3), in uK."""
    c = constants
    e = 4 * np.pi * c.hbar**2 * c.a_s / c.mRb * density_cm3 * 1e6
    return e / c.kB * 1e6


def g1d_from_physical(n_atoms: float, omega_trans: float, constants: Constants = CONSTANTS) -> float:
    """1D coupling (uK*um) for ``n_atoms`` in a transverse trap ``omega_trans`` (rad/s).

    The transverse ground state occupies the area a_perp = pi hbar/(m omega),
    so g1d = 4 pi hbar^2 a_s N / (m a_perp).
    """
    if n_atoms < 0 or not omega_trans > 0:
        raise DomainError("need n_atoms >= 0 and omega_trans > 0")
    c = constants
    a_perp = np.pi * c.hbar / (c.mRb * omega_trans)
    g_si = 4 * np.pi * c.hbar**2 * c.a_s * n_atoms / (c.mRb * a_perp)  # J*m
    return g_si / c.kB * 1e6 * 1e6


def g1d_from_density(density_cm3: float, peak_linear_density: float, constants: Constants = CONSTANTS) -> float:
    """1D coupling (uK*um) giving peak 3D density ``density_cm3`` for a normalized
    state whose maximum of |psi|^2 is ``peak_linear_density`` (1/um)."""
    if density_cm3 < 0 or not peak_linear_density > 0:
        raise DomainError("need density >= 0 and a positive peak linear density")
    return interaction_energy_uK(density_cm3, constants) / peak_linear_density


def peak_density_cm3(g1d: float, peak_linear_density: float, constants: Constants = CONSTANTS) -> float:
    """Inverse of :func:`g1d_from_density`."""
    return g1d * peak_linear_density / interaction_energy_uK(1.0, constants)


def _absorbing_mask(grid: Grid1D, width: float, strength: float, dt: float) -> np.ndarray:
    x = grid.x
    depth = np.maximum(np.maximum(grid.x_min + width - x, x - (grid.x_max - width)), 0.0) / width
    return np.cos(0.5 * np.pi * np.clip(depth, 0.0, 1.0)) ** (strength * dt)


def propagate(
    wf: WaveFunction,
    potential,
    config: PropagationConfig,
    units: UnitSystem = UNITS,
    on_snapshot: Optional[Callable[[WaveFunction, Observables], None]] = None,
) -> Trajectory:
    """Strang split-step evolution from ``wf.time`` to ``config.t_end``.

    Each step applies half a kinetic step in k-space, the phase of
    V(x, t + dt/2) + g|psi|^2 in x-space, and the second kinetic half;
    consecutive kinetic halves are merged between snapshots. Observables are
    recorded at the initial time, every ``snapshot_every`` steps, and at the
    final time.
    """
    grid = wf.grid
    dt = config.dt
    t_start = wf.time
    span = config.t_end - t_start
    n_steps = int(round(span / dt))
    if n_steps < 0 or abs(n_steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise DomainError(f"t_end - t_start = {span} us is not a multiple of dt = {dt} us")

    hm = units.hbar_over_m
    half = np.exp(-0.5j * hm * grid.k**2 * (0.5 * dt))
    full = half * half
    x = grid.x
    g = units.uK * config.g1d
    vscale = units.uK * dt
    mask = _absorbing_mask(grid, config.absorb_width, config.absorb_strength, dt) if config.absorb_width > 0 else None

    traj = Trajectory()
    norm0 = wf.norm()

    def record(psi, t):
        state = WaveFunction(grid, psi, t)
        obs = observables(state, units)
        traj.times.append(t)
        traj.observables.append(obs)
        if config.keep_states:
            traj.snapshots.append(state)
        if on_snapshot is not None:
            on_snapshot(state, obs)
        return state

    psi = wf.amplitudes.copy()
    record(psi.copy(), t_start)
    psi_k = sfft.fft(psi) * half
    every = int(config.snapshot_every)
    for step in range(1, n_steps + 1):
        t_mid = t_start + (step - 0.5) * dt
        psi = sfft.ifft(psi_k, overwrite_x=True)
        phase = potential.evaluate(x, t_mid) * vscale
        if g:
            phase += (g * dt) * (psi.real**2 + psi.imag**2)
        psi *= np.exp(-1j * phase)
        if mask is not None:
            psi *= mask
        psi_k = sfft.fft(psi, overwrite_x=True)
        if not np.isfinite(psi_k[0]):
            raise NumericalError(f"non-finite amplitudes at step {step} (t={t_mid + 0.5 * dt:.6g} us)")
        t_now = t_start + step * dt
        if step % every == 0 or step == n_steps:
            psi_k *= half
            record(sfft.ifft(psi_k), t_now)
            psi_k *= half
        else:
            psi_k *= full

    final = sfft.ifft(psi_k / half)
    traj.final = WaveFunction(grid, final, t_start + n_steps * dt)
    if mask is not None:
        traj.absorbed_norm = norm0 - traj.final.norm()
        if traj.absorbed_norm > 1e-3 * norm0:
            msg = f"absorbing boundary removed {traj.absorbed_norm:.3g} of the norm"
            traj.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return traj


def energy(wf: WaveFunction, potential, g1d: float = 0.0, t: float = 0.0, units: UnitSystem = UNITS) -> float:
    """GPE energy functional per particle in uK: <T> + <V> + g/2 <|psi|^2>."""
    grid = wf.grid
    rho = wf.density()
    n = rho.sum() * grid.dx
    pk = np.abs(sfft.fft(wf.amplitudes)) ** 2
    ekin = 0.5 * units.hbar_over_m * float(np.dot(pk, grid.k**2) / pk.sum())
    epot = float(np.dot(rho, potential.evaluate(grid.x, t)) * grid.dx / n)
    eint = 0.5 * g1d * float(np.dot(rho, rho) * grid.dx / n**2)
    return units.internal_to_uK(ekin) + epot + eint


def energy_components(wf: WaveFunction, potential, g1d: float = 0.0, t: float = 0.0, units: UnitSystem = UNITS) -> dict:
    grid = wf.grid
    rho = wf.density() / wf.norm()
    pk = np.abs(sfft.fft(wf.amplitudes)) ** 2
    return {
        "kinetic": units.internal_to_uK(0.5 * units.hbar_over_m * float(np.dot(pk, grid.k**2) / pk.sum())),
        "potential": float(np.dot(rho, potential.evaluate(grid.x, t)) * grid.dx),
        "interaction": 0.5 * g1d * float(np.dot(rho, rho) * grid.dx),
    }


@dataclass
class GroundStateInfo:
    energy: float
    stages: list
    converged: bool


def imaginary_time_ground_state(
    potential,
    grid: Grid1D,
    t: float = 0.0,
    g1d: float = 0.0,
    tol: float = 1e-11,
    dtau: Optional[float] = None,
    n_refine: int = 3,
    refine_factor: float = 5.0,
    max_steps: int = 200_000,
    check_every: int = 20,
    initial: Optional[WaveFunction] = None,
    units: UnitSystem = UNITS,
    full_output: bool = False,
):
    """Lowest-energy state of V(x, t) + g1d |psi|^2 by imaginary-time split-step.

    The state is renormalized after every step. A stage ends when the
    change of psi between checks drops below ``tol``; the step is then
    divided by ``refine_factor`` ``n_refine`` times to shrink the
    splitting bias. ``dtau`` (us) defaults to 0.1 over the energy scale of
    the starting state.
    """
    v_int = potential.evaluate(grid.x, t) * units.uK
    v_int = v_int - v_int.min()
    g = g1d * units.uK
    hm = units.hbar_over_m
    k2 = grid.k**2

    if initial is None:
        centre = grid.x[np.argmin(v_int)]
        width = 0.1 * grid.length
        psi = np.exp(-((grid.x - centre) ** 2) / (2 * width**2)).astype(complex)
    else:
        psi = initial.amplitudes.astype(complex).copy()
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)

    def energy_int(p):
        rho = np.abs(p) ** 2
        pk = np.abs(sfft.fft(p)) ** 2
        ek = 0.5 * hm * np.dot(pk, k2) / pk.sum()
        return ek + (np.dot(rho, v_int) + 0.5 * g * np.dot(rho, rho)) * grid.dx

    if dtau is None:
        dtau = 0.1 / max(energy_int(psi), 1e-12)

    stages = []
    steps_total = 0
    converged = False
    for stage in range(n_refine + 1):
        kin_half = np.exp(-0.5 * hm * k2 * (0.5 * dtau))
        vexp = np.exp(-v_int * dtau)
        prev = psi.copy()
        checks = 0
        stage_done = False
        while steps_total < max_steps:
            for _ in range(check_every):
                psi = sfft.ifft(kin_half * sfft.fft(psi))
                if g:
                    psi *= vexp * np.exp(-g * dtau * np.abs(psi) ** 2)
                else:
                    psi *= vexp
                psi = sfft.ifft(kin_half * sfft.fft(psi))
                nrm = np.sum(np.abs(psi) ** 2) * grid.dx
                if not np.isfinite(nrm) or nrm == 0:
                    raise NumericalError(f"imaginary-time evolution diverged at step {steps_total}")
                psi /= np.sqrt(nrm)
                steps_total += 1
            checks += 1
            change = np.sqrt(np.sum(np.abs(psi - prev) ** 2) * grid.dx)
            prev = psi.copy()
            if change < tol:
                stage_done = True
                break
        stages.append({"dtau": dtau, "checks": checks, "change": float(change)})
        if not stage_done:
            break
        if stage == n_refine:
            converged = True
        dtau /= refine_factor

    edge = max(1, grid.n_points // 20)
    rho = np.abs(psi) ** 2
    if (rho[:edge].max() + rho[-edge:].max()) > 1e-6 * rho.max():
        raise DomainError("potential does not confine the state inside the grid")
    if not converged:
        raise NumericalError(
            f"imaginary-time ground state not converged after {steps_total} steps "
            f"(last change {stages[-1]['change']:.3g}, tol {tol:.3g})"
        )

    # fix the global phase so the result is real and positive at the peak
    i = int(np.argmax(rho))
    psi *= np.exp(-1j * np.angle(psi[i]))
    wf = WaveFunction(grid, psi, t)
    if full_output:
        e = units.internal_to_uK(energy_int(psi)) + potential.evaluate(grid.x, t).min()
        return wf, GroundStateInfo(energy=float(e), stages=stages, converged=converged)
    return wf


def harmonic_curvature_for_sigma(sigma: float, units: UnitSystem = UNITS) -> float:
    """Curvature (uK/um^2) of the harmonic trap whose ground state is
    exp(-x^2 / 2 sigma^2)."""
    omega = units.hbar_over_m / sigma**2
    return omega**2 / units.hbar_over_m / units.uK


def dispersed_width(width0: float, sigma: float, t: float, units: UnitSystem = UNITS) -> float:
    """Free-space rms width of a Gaussian packet after time ``t``."""
    return width0 * math.sqrt(1 + (units.hbar_over_m * t / sigma**2) ** 2)
