import numpy as np
import pytest

from mwshape import potentials as pot
from mwshape.core import UNITS, DomainError, Grid1D, gaussian_packet
from mwshape.cylgpe import (
    CylGrid,
    CylState,
    cyl_ground_state,
    cyl_propagate,
    g3d_internal,
    oscillator_length,
)
from mwshape.propagator import PropagationConfig, propagate

OMEGA = 2 * np.pi * 400.0
LONG = Grid1D(-25.0, 55.0, 2**10)


@pytest.fixture(scope="module")
def grid():
    return CylGrid.for_trap(LONG, OMEGA, 128)


@pytest.fixture(scope="module")
def free_ground(grid):
    return cyl_ground_state(grid, OMEGA, 0.0, full_output=True)


@pytest.fixture(scope="module")
def bec_ground(grid):
    return cyl_ground_state(grid, OMEGA, 1000.0, full_output=True)


def test_oscillator_length_and_coupling():
    # sqrt(hbar / (m omega)) for 87Rb at 400 Hz, and 4 pi hbar^2 a_s / m expressed per hbar
    assert oscillator_length(OMEGA) == pytest.approx(0.53920, rel=1e-4)
    assert g3d_internal() == pytest.approx(4 * np.pi * UNITS.hbar_over_m * 95.5 * 5.29177210903e-5, rel=1e-9)


def test_non_interacting_transverse_width(free_ground):
    state, info = free_ground
    a = oscillator_length(OMEGA)
    assert state.width_trans() == pytest.approx(a / np.sqrt(2), rel=1e-3)
    assert state.norm() == pytest.approx(1.0, abs=1e-12)
    # fixed marginal: the longitudinal profile is the initial packet
    target = gaussian_packet(LONG, 10.0, 0.0).density()
    np.testing.assert_allclose(state.marginal(), target, atol=1e-10)
    # transverse zero-point energy hbar omega plus the packet's longitudinal
    # kinetic energy hbar^2 / (8 m dx^2)
    dx = gaussian_packet(LONG, 10.0, 0.0).density()
    x = LONG.x
    var = np.sum(dx * x * x) / dx.sum() - (np.sum(dx * x) / dx.sum()) ** 2
    expect = (OMEGA * 1e-6 + UNITS.hbar_over_m / (8 * var)) / UNITS.uK
    assert info.chemical_potential_uK == pytest.approx(expect, rel=5e-4)


def test_non_interacting_peak_density(free_ground):
    state, _ = free_ground
    a = oscillator_length(OMEGA)
    marginal_peak = gaussian_packet(LONG, 10.0, 0.0).density().max()
    expect = 1000.0 * marginal_peak / (np.pi * a * a) * 1e12
    scaled = CylState(state.grid, state.amplitudes, OMEGA, 1000.0)
    assert scaled.peak_density_cm3() == pytest.approx(expect, rel=2e-3)


def test_interacting_ground_state(bec_ground, free_ground):
    state, info = bec_ground
    free, _ = free_ground
    # repulsion widens the cloud and lowers the peak density
    assert state.width_trans() > free.width_trans()
    free_peak = CylState(free.grid, free.amplitudes, OMEGA, 1000.0).peak_density_cm3()
    assert state.peak_density_cm3() < free_peak
    # regression values of this solver (N = 1000, 400 Hz, 10 um FWHM packet)
    assert state.width_trans() == pytest.approx(0.4477, rel=2e-3)
    assert state.peak_density_cm3() == pytest.approx(8.22e13, rel=1e-2)
    assert info.chemical_potential_uK > OMEGA * 1e-6 / UNITS.uK


def test_ground_state_is_stationary(bec_ground):
    state, _ = bec_ground
    tr = cyl_propagate(state, pot.Constant(0.0), PropagationConfig(dt=0.5, t_end=50.0, snapshot_every=20))
    a = tr.as_arrays()
    assert np.ptp(a["width_trans"]) / a["width_trans"][0] < 1e-3
    assert abs(a["norm"][-1] - 1.0) < 1e-10


def test_separable_limit_matches_1d(free_ground):
    state, _ = free_ground
    moving = state.boosted(2.0)
    well = pot.CosineWell(30.0, 40.0, 30.0, 20.0, 0.0, pot.FixedCenter(10.0))
    cfg = PropagationConfig(dt=0.5, t_end=80.0, snapshot_every=160)
    cyl = cyl_propagate(moving, well, cfg)
    one = propagate(gaussian_packet(LONG, 10.0, 2.0), well, cfg)
    np.testing.assert_allclose(cyl.final.marginal(), one.final.density(), atol=1e-8)
    assert cyl.width_long[-1] == pytest.approx(one.observables[-1].width_dx, rel=1e-6)


def test_resample_and_boost_keep_norm(bec_ground):
    state, _ = bec_ground
    fine = state.resampled(Grid1D(-25.0, 55.0, 2**11))
    assert fine.norm() == pytest.approx(1.0, abs=1e-12)
    assert fine.width_long() == pytest.approx(state.width_long(), rel=1e-6)
    assert state.boosted(10.0).norm() == pytest.approx(state.norm(), rel=1e-12)
    with pytest.raises(DomainError):
        state.resampled(Grid1D(-20.0, 60.0, 2**11))


def test_input_checks(grid):
    with pytest.raises(DomainError):
        cyl_ground_state(CylGrid(LONG, 64, 1.0), OMEGA, 1000.0)
    with pytest.raises(DomainError):
        CylState(grid, np.zeros((3, 3)), OMEGA, 1.0)
    with pytest.raises(DomainError):
        CylGrid(LONG, 2, 1.0)
