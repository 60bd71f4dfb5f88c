"""Gross-Pitaevskii evolution in cylindrical (x, r) coordinates.

The longitudinal kinetic term is applied spectrally; the radial Laplacian
(1/r) d/dr (r d/dr) is discretized on the staggered grid r_j = (j + 1/2) dr
and stepped with Crank-Nicolson, which is unitary in the r-weighted inner
product. Amplitudes are stored as (x, r) arrays normalized to
2 pi sum |psi|^2 r dr dx = 1; the atom number enters only through the
interaction g3d * N |psi|^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft as sfft
from scipy.linalg import solve_banded

from .core import (
    CONSTANTS,
    UNITS,
    Constants,
    DomainError,
    Grid1D,
    NumericalError,
    UnitSystem,
    gaussian_packet,
)
from .propagator import PropagationConfig

UM3_TO_CM3 = 1e12


def oscillator_length(omega: float, units: UnitSystem = UNITS) -> float:
    """sqrt(hbar / (m omega)) in um for ``omega`` in rad/s."""
    return float(np.sqrt(units.hbar_over_m / (omega * 1e-6)))


def g3d_internal(units: UnitSystem = UNITS, constants: Constants = CONSTANTS) -> float:
    """4 pi hbar a_s / m in um^3 rad/us."""
    return 4 * np.pi * units.hbar_over_m * constants.a_s * 1e6


@dataclass(frozen=True)
class CylGrid:
    """Longitudinal grid times a staggered radial grid of ``n_radial`` points."""

    longitudinal: Grid1D
    n_radial: int = 128
    r_max: float = 3.0

    def __post_init__(self):
        if self.n_radial < 4 or not self.r_max > 0:
            raise DomainError("need n_radial >= 4 and r_max > 0")

    @classmethod
    def for_trap(cls, longitudinal: Grid1D, omega: float, n_radial: int = 128, widths: float = 6.0,
                 units: UnitSystem = UNITS) -> "CylGrid":
        return cls(longitudinal, n_radial, widths * oscillator_length(omega, units))

    @property
    def dr(self) -> float:
        return self.r_max / self.n_radial

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.n_radial) + 0.5) * self.dr

    def weights(self) -> np.ndarray:
        """Volume element 2 pi r dr dx per (x, r) cell, broadcast over x."""
        return 2 * np.pi * self.r * self.dr * self.longitudinal.dx


@dataclass
class CylState:
    grid: CylGrid
    amplitudes: np.ndarray
    omega: float
    n_atoms: float
    time: float = 0.0

    def __post_init__(self):
        shape = (self.grid.longitudinal.n_points, self.grid.n_radial)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != shape:
            raise DomainError(f"amplitudes have shape {self.amplitudes.shape}, grid needs {shape}")

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density() * self.grid.weights()))

    def marginal(self) -> np.ndarray:
        """Longitudinal density (1/um) integrated over the cross-section."""
        return self.density() @ (2 * np.pi * self.grid.r * self.grid.dr)

    def width_long(self) -> float:
        x = self.grid.longitudinal.x
        rho = self.marginal()
        n = rho.sum()
        m = np.dot(rho, x) / n
        return float(np.sqrt(max(np.dot(rho, x * x) / n - m * m, 0.0)))

    def width_trans(self) -> float:
        """rms width along one transverse axis, sqrt(<r^2>/2)."""
        rho = self.density()
        w = self.grid.weights()
        return float(np.sqrt(0.5 * np.sum(rho * w * self.grid.r**2) / np.sum(rho * w)))

    def peak_density_cm3(self) -> float:
        return float(self.n_atoms * self.density().max() / self.norm() * UM3_TO_CM3)

    def resampled(self, longitudinal: Grid1D) -> "CylState":
        """Band-limited interpolation along x onto a finer grid over the same interval."""
        old = self.grid.longitudinal
        if (longitudinal.x_min, longitudinal.x_max) != (old.x_min, old.x_max):
            raise DomainError("resampling keeps the longitudinal interval fixed")
        n_old, n_new = old.n_points, longitudinal.n_points
        if n_new < n_old:
            raise DomainError("resampling only refines the grid")
        spec = sfft.fft(self.amplitudes, axis=0)
        padded = np.zeros((n_new, self.grid.n_radial), dtype=complex)
        h = n_old // 2
        padded[:h] = spec[:h]
        padded[-h:] = spec[-h:]
        amps = sfft.ifft(padded, axis=0) * (n_new / n_old)
        grid = CylGrid(longitudinal, self.grid.n_radial, self.grid.r_max)
        out = CylState(grid, amps, self.omega, self.n_atoms, self.time)
        out.amplitudes /= np.sqrt(out.norm())
        return out

    def boosted(self, v_cm: float, units: UnitSystem = UNITS) -> "CylState":
        """Copy with the longitudinal phase exp(i k0 x) of velocity ``v_cm``."""
        k0 = units.velocity_to_k(v_cm)
        phase = np.exp(1j * k0 * self.grid.longitudinal.x)[:, None]
        return CylState(self.grid, self.amplitudes * phase, self.omega, self.n_atoms, self.time)


def _radial_operator(grid: CylGrid) -> tuple:
    """Diagonals (lower, diag, upper) of (1/r) d/dr (r d/dr) with psi = 0 past r_max."""
    r = grid.r
    dr = grid.dr
    r_minus = r - 0.5 * dr
    r_plus = r + 0.5 * dr
    lower = r_minus / (r * dr * dr)
    upper = r_plus / (r * dr * dr)
    diag = -(r_minus + r_plus) / (r * dr * dr)
    return lower, diag, upper


class _RadialStepper:
    """(1 + c H) psi_new = (1 - c H) psi for H = -(hbar/2m) L_r, along axis 0."""

    def __init__(self, grid: CylGrid, c: complex, units: UnitSystem):
        lo, d, up = _radial_operator(grid)
        h = -0.5 * units.hbar_over_m
        self.hl, self.hd, self.hu = c * h * lo, c * h * d, c * h * up
        n = grid.n_radial
        ab = np.zeros((3, n), dtype=complex)
        ab[0, 1:] = self.hu[:-1]
        ab[1, :] = 1 + self.hd
        ab[2, :-1] = self.hl[1:]
        self.ab = ab

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        rhs = (1 - self.hd)[:, None] * psi
        rhs[1:] -= self.hl[1:, None] * psi[:-1]
        rhs[:-1] -= self.hu[:-1, None] * psi[1:]
        return solve_banded((1, 1), self.ab, rhs, overwrite_b=True, check_finite=False)


def _transverse_potential(grid: CylGrid, omega: float, units: UnitSystem) -> np.ndarray:
    w = omega * 1e-6
    return 0.5 * w * w * grid.r**2 / units.hbar_over_m


@dataclass
class CylGroundInfo:
    steps: int
    change: float
    chemical_potential_uK: float
    peak_density_cm3: float


def cyl_ground_state(
    grid: CylGrid,
    omega: float,
    n_atoms: float,
    longitudinal_trap=None,
    fwhm_amplitude: float = 10.0,
    dtau: float = 2.0,
    tol: float = 1e-9,
    max_steps: int = 50_000,
    check_every: int = 20,
    units: UnitSystem = UNITS,
    constants: Constants = CONSTANTS,
    full_output: bool = False,
):
    """Imaginary-time ground state of the transverse trap ``omega`` (rad/s).

    Without ``longitudinal_trap`` the longitudinal density is held at the
    Gaussian packet of amplitude FWHM ``fwhm_amplitude``: after each step
    every x-slice is rescaled to that marginal, so only the transverse
    profile relaxes (in the local interaction field). With a trap
    (a potential in uK) the full (x, r) problem relaxes instead,
    which is slow for weak longitudinal confinement.
    """
    if n_atoms < 0 or not omega > 0:
        raise DomainError("need n_atoms >= 0 and omega > 0")
    lg = grid.longitudinal
    w = grid.weights()
    r = grid.r
    a_ho = oscillator_length(omega, units)
    if grid.r_max < 4 * a_ho:
        raise DomainError(f"r_max = {grid.r_max:.3g} um is below 4 oscillator lengths ({4 * a_ho:.3g} um)")
    v_tr = _transverse_potential(grid, omega, units)[None, :]
    g = g3d_internal(units, constants) * n_atoms

    if longitudinal_trap is None:
        target = gaussian_packet(lg, fwhm_amplitude, 0.0).density()
        v_long = np.zeros(lg.n_points)
        prof = np.sqrt(target)
    else:
        target = None
        v_long = longitudinal_trap.evaluate(lg.x, 0.0) * units.uK
        v_long = v_long - v_long.min()
        prof = np.exp(-0.5 * ((lg.x - lg.x[np.argmin(v_long)]) / (0.1 * lg.length)) ** 2)
    psi = prof[:, None] * np.exp(-0.5 * (r / a_ho) ** 2)[None, :]
    psi = psi.astype(float)

    def renorm(p):
        if target is not None:
            slice_norm = (np.abs(p) ** 2) @ (2 * np.pi * r * grid.dr)
            scale = np.sqrt(np.divide(target, slice_norm, out=np.zeros_like(target), where=slice_norm > 0))
            p = p * scale[:, None]
        n = np.sum(np.abs(p) ** 2 * w)
        if not np.isfinite(n) or n == 0:
            raise NumericalError("imaginary-time evolution diverged")
        return p / np.sqrt(n)

    psi = renorm(psi)
    radial = _RadialStepper(grid, 0.25 * dtau, units)
    kin_half = np.exp(-0.5 * units.hbar_over_m * lg.k**2 * 0.5 * dtau)[None, :]
    vstatic = v_long[None, :] + v_tr.T  # (nr, nx)

    work = psi.T.copy()  # (nr, nx)
    prev = work.copy()
    steps = 0
    change = np.inf
    while steps < max_steps:
        for _ in range(check_every):
            if target is None:
                work = sfft.ifft(kin_half * sfft.fft(work, axis=1), axis=1).real
            work = radial(work).real
            work = work * np.exp(-dtau * (vstatic + g * work * work))
            work = radial(work).real
            if target is None:
                work = sfft.ifft(kin_half * sfft.fft(work, axis=1), axis=1).real
            work = renorm(work.T).T
            steps += 1
        change = float(np.sqrt(np.sum((work - prev) ** 2 * w[:, None])))
        prev = work.copy()
        if change < tol:
            break
    if change >= tol:
        raise NumericalError(f"cylindrical ground state not converged after {steps} steps (change {change:.3g})")

    state = CylState(grid, work.T.astype(complex), omega, n_atoms, 0.0)
    if full_output:
        mu = _chemical_potential(state, v_long, v_tr[0], g, units)
        info = CylGroundInfo(steps, change, units.internal_to_uK(mu), state.peak_density_cm3())
        return state, info
    return state


def _chemical_potential(state: CylState, v_long, v_tr, g, units) -> float:
    """<psi| H + g|psi|^2 |psi> in rad/us."""
    psi = state.amplitudes.T  # (nr, nx)
    grid = state.grid
    lo, d, up = _radial_operator(grid)
    lap = d[:, None] * psi
    lap[1:] += lo[1:, None] * psi[:-1]
    lap[:-1] += up[:-1, None] * psi[1:]
    hpsi = -0.5 * units.hbar_over_m * lap
    hpsi += sfft.ifft(0.5 * units.hbar_over_m * grid.longitudinal.k[None, :] ** 2 * sfft.fft(psi, axis=1), axis=1)
    hpsi += (v_long[None, :] + v_tr[:, None] + g * np.abs(psi) ** 2) * psi
    w = grid.weights()[:, None]
    return float(np.real(np.sum(np.conj(psi) * hpsi * w)) / np.sum(np.abs(psi) ** 2 * w))


@dataclass
class CylTrajectory:
    times: list = field(default_factory=list)
    width_long: list = field(default_factory=list)
    width_trans: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    final: Optional[CylState] = None
    warnings: list = field(default_factory=list)

    def as_arrays(self) -> dict:
        return {k: np.asarray(getattr(self, k)) for k in ("times", "width_long", "width_trans", "norm")}


def cyl_propagate(
    state: CylState,
    potential,
    config: PropagationConfig,
    units: UnitSystem = UNITS,
    constants: Constants = CONSTANTS,
) -> CylTrajectory:
    """Real-time Strang splitting: x-kinetic, radial CN, potential + interaction.

    ``potential`` acts along x only; the transverse trap stays on. Records
    longitudinal and transverse rms widths every ``config.snapshot_every``
    steps and at the end. ``config.g1d`` is ignored; the coupling comes from
    the state's atom number.
    """
    grid = state.grid
    lg = grid.longitudinal
    dt = config.dt
    span = config.t_end - state.time
    n_steps = int(round(span / dt))
    if n_steps < 0 or abs(n_steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise DomainError(f"t_end - t_start = {span} us is not a multiple of dt = {dt} us")

    radial = _RadialStepper(grid, 0.25j * dt, units)
    half = np.exp(-0.5j * units.hbar_over_m * lg.k**2 * 0.5 * dt)[None, :]
    v_tr = _transverse_potential(grid, state.omega, units)[:, None]
    g = g3d_internal(units, constants) * state.n_atoms
    x = lg.x
    traj = CylTrajectory()

    def record(psi_rx, t):
        s = CylState(grid, psi_rx.T, state.omega, state.n_atoms, t)
        traj.times.append(t)
        traj.width_long.append(s.width_long())
        traj.width_trans.append(s.width_trans())
        traj.norm.append(s.norm())
        return s

    psi = state.amplitudes.T.copy()
    record(psi, state.time)
    every = int(config.snapshot_every)
    for step in range(1, n_steps + 1):
        t_mid = state.time + (step - 0.5) * dt
        psi = sfft.ifft(half * sfft.fft(psi, axis=1), axis=1)
        psi = radial(psi)
        phase = (potential.evaluate(x, t_mid) * units.uK)[None, :] + v_tr
        psi *= np.exp(-1j * dt * (phase + g * (psi.real**2 + psi.imag**2)))
        psi = radial(psi)
        psi = sfft.ifft(half * sfft.fft(psi, axis=1), axis=1)
        if not np.isfinite(psi[0, 0]):
            raise NumericalError(f"non-finite amplitudes at step {step} (t={t_mid + 0.5 * dt:.6g} us)")
        if step % every == 0 or step == n_steps:
            record(psi, state.time + step * dt)

    traj.final = CylState(grid, psi.T, state.omega, state.n_atoms, state.time + n_steps * dt)
    rho = traj.final.density()
    peak = rho.max()
    edge_x = max(1, lg.n_points // 50)
    if rho[:, -1].max() > 1e-6 * peak or max(rho[:edge_x].max(), rho[-edge_x:].max()) > 1e-6 * peak:
        msg = "density reaches the edge of the cylindrical grid"
        traj.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return traj
