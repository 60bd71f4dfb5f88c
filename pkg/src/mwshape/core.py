"""Constants, units, grids and wave-function observables.

Lengths are in micrometres and times in microseconds throughout. Energies
are quoted in microkelvin at every public interface and handled internally
as angular frequencies (rad/us), so the Schrodinger evolution carries no
factors of hbar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft


class DomainError(ValueError):
    """Input outside the domain where an operation is defined."""


class ContractError(ValueError):
    """Arguments inconsistent with each other (shapes, masks, arities)."""


class NumericalError(RuntimeError):
    """A computation produced non-finite values or failed to converge."""


@dataclass(frozen=True)
class Constants:
    """SI constants for 87Rb in the |2,2> state."""

    hbar: float = 1.054571817e-34
    kB: float = 1.380649e-23
    mRb: float = 86.909180527 * 1.66053906660e-27
    a0: float = 5.29177210903e-11
    a_s_bohr: float = 95.5

    @property
    def a_s(self) -> float:
        return self.a_s_bohr * self.a0


CONSTANTS = Constants()


@dataclass(frozen=True)
class UnitSystem:
    """Conversions between the external (uK, cm/s) and internal units."""

    constants: Constants = CONSTANTS

    @cached_property
    def hbar_over_m(self) -> float:
        """hbar/m in um^2/us."""
        c = self.constants
        return c.hbar / c.mRb * 1e12 / 1e6

    @cached_property
    def uK(self) -> float:
        """Angular frequency (rad/us) equivalent to 1 uK."""
        c = self.constants
        return c.kB * 1e-6 / c.hbar * 1e-6

    def uK_to_internal(self, e_uK):
        return np.asarray(e_uK) * self.uK if np.ndim(e_uK) else e_uK * self.uK

    def internal_to_uK(self, e_rad_us):
        return np.asarray(e_rad_us) / self.uK if np.ndim(e_rad_us) else e_rad_us / self.uK

    @staticmethod
    def cm_s_to_um_us(v_cm):
        return v_cm * 1e-2

    @staticmethod
    def um_us_to_cm_s(v):
        return v * 1e2

    def velocity_to_k(self, v_cm):
        """Wave number (rad/um) of a particle moving at ``v_cm`` cm/s."""
        return self.cm_s_to_um_us(v_cm) / self.hbar_over_m

    def k_to_velocity(self, k):
        """Velocity in cm/s for wave number ``k`` in rad/um."""
        return self.um_us_to_cm_s(k * self.hbar_over_m)


UNITS = UnitSystem()


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Periodic uniform grid on ``[x_min, x_max)`` with its FFT momenta."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise DomainError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        if not _is_power_of_two(int(self.n_points)) or int(self.n_points) != self.n_points:
            raise DomainError(f"n_points must be a power of two, got {self.n_points}")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @cached_property
    def k(self) -> np.ndarray:
        """Wave numbers in standard FFT order (rad/um)."""
        return 2 * np.pi * sfft.fftfreq(self.n_points, d=self.dx)

    @property
    def k_max(self) -> float:
        return np.pi / self.dx

    def with_points(self, n_points: int) -> "Grid1D":
        return Grid1D(self.x_min, self.x_max, n_points)


@dataclass
class WaveFunction:
    grid: Grid1D
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.grid.n_points,):
            raise ContractError(
                f"amplitudes shape {self.amplitudes.shape} does not match grid ({self.grid.n_points},)"
            )

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density()) * self.grid.dx)

    def normalized(self) -> "WaveFunction":
        n = self.norm()
        if not n > 0:
            raise DomainError("cannot normalize a state with zero norm")
        return WaveFunction(self.grid, self.amplitudes / np.sqrt(n), self.time)

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes.copy(), self.time)

    def shifted(self, n_cells: int) -> "WaveFunction":
        """Rigid translation by an integer number of grid cells (periodic)."""
        return WaveFunction(self.grid, np.roll(self.amplitudes, n_cells), self.time)

    def momentum_amplitudes(self) -> np.ndarray:
        """Unitary continuous Fourier transform sampled on ``grid.k``.

        Normalized so that ``sum(|phi|^2) * dk`` equals the norm.
        """
        g = self.grid
        phase = np.exp(-1j * g.k * g.x_min)
        return sfft.fft(self.amplitudes) * phase * g.dx / np.sqrt(2 * np.pi)


@dataclass
class Observables:
    norm: float
    mean_x: float
    width_dx: float
    mean_p: float
    width_p: float
    kinetic_energy: float
    momentum_density: np.ndarray = field(repr=False)


def observables(wf: WaveFunction, units: UnitSystem = UNITS) -> Observables:
    """Position moments from |psi|^2 and momentum moments from the spectrum.

    ``mean_p`` and ``width_p`` are expressed as velocities (cm/s),
    ``kinetic_energy`` in uK per particle. ``momentum_density`` is
    ``|psi(k)|^2`` in FFT order on ``wf.grid.k`` and integrates (with dk) to
    the norm.
    """
    g = wf.grid
    rho = wf.density()
    total = float(rho.sum())
    norm = total * g.dx
    if not norm > 0:
        raise DomainError("observables undefined for a state with zero norm")
    x = g.x
    mean_x = float(np.dot(rho, x) / total)
    var_x = float(np.dot(rho, (x - mean_x) ** 2) / total)

    phi = wf.momentum_amplitudes()
    pk = np.abs(phi) ** 2
    ptot = float(pk.sum())
    k = g.k
    mean_k = float(np.dot(pk, k) / ptot)
    var_k = float(np.dot(pk, (k - mean_k) ** 2) / ptot)
    ekin = 0.5 * units.hbar_over_m * float(np.dot(pk, k * k) / ptot)

    return Observables(
        norm=norm,
        mean_x=mean_x,
        width_dx=float(np.sqrt(max(var_x, 0.0))),
        mean_p=float(units.k_to_velocity(mean_k)),
        width_p=float(units.k_to_velocity(np.sqrt(max(var_k, 0.0)))),
        kinetic_energy=float(units.internal_to_uK(ekin)),
        momentum_density=pk,
    )


def fwhm_to_sigma(fwhm_amplitude: float) -> float:
    """Gaussian sigma whose amplitude exp(-x^2/2 sigma^2) has the given FWHM."""
    return fwhm_amplitude / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def gaussian_packet(
    grid: Grid1D,
    fwhm_amplitude: float = 10.0,
    v_cm: float = 10.0,
    x0: float = 0.0,
    units: UnitSystem = UNITS,
) -> WaveFunction:
    """Normalized Gaussian packet with a plane-wave phase.

    ``fwhm_amplitude`` is the full width at half maximum of ``|psi|`` (not of
    the density), ``v_cm`` the centre-of-mass velocity.
    """
    if not fwhm_amplitude > 0:
        raise DomainError(f"fwhm_amplitude must be positive, got {fwhm_amplitude}")
    sigma = fwhm_to_sigma(fwhm_amplitude)
    if x0 - 5 * sigma < grid.x_min or x0 + 5 * sigma > grid.x_max:
        raise DomainError(
            f"packet at x0={x0} with sigma={sigma:.4g} needs [{x0 - 5 * sigma:.4g}, "
            f"{x0 + 5 * sigma:.4g}] inside the grid [{grid.x_min}, {grid.x_max}]"
        )
    x = grid.x
    k0 = units.velocity_to_k(v_cm)
    k_nyq = np.pi / grid.dx
    if abs(k0) + 5 / sigma > k_nyq:
        raise DomainError(
            f"packet momentum |k0|={abs(k0):.4g} + 5/sigma exceeds the grid's Nyquist wavenumber "
            f"{k_nyq:.4g} 1/um; use more points"
        )
    psi = np.exp(-((x - x0) ** 2) / (2 * sigma**2) + 1j * k0 * (x - x0))
    psi /= np.sqrt(sigma * np.sqrt(np.pi))
    wf = WaveFunction(grid, psi, 0.0)
    return wf.normalized()
