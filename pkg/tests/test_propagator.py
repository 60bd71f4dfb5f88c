import math
import warnings

import numpy as np
import pytest

from mwshape import potentials as pot
from mwshape.core import UNITS, DomainError, Grid1D, NumericalError, gaussian_packet, observables
from mwshape.propagator import (
    PropagationConfig,
    dispersed_width,
    energy,
    energy_components,
    g1d_from_density,
    g1d_from_physical,
    harmonic_curvature_for_sigma,
    imaginary_time_ground_state,
    interaction_energy_uK,
    peak_density_cm3,
    propagate,
)

HBAR = 1.054571817e-34
KB = 1.380649e-23
M_RB = 86.909180527 * 1.66053906660e-27
A_S = 95.5 * 5.29177210903e-11
SIGMA_10 = 10.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
FOCUS = pot.CosineWell(97.73, 203.4, 134.3, 50.0, 0.0, pot.FixedCenter(13.23))


def test_config_validation():
    for bad in ({"dt": 0.0}, {"snapshot_every": 0}, {"g1d": -1.0}, {"absorb_width": -1.0}):
        with pytest.raises(DomainError):
            PropagationConfig(**bad)


def test_t_end_must_be_step_aligned():
    g = Grid1D(-40, 40, 2**10)
    with pytest.raises(DomainError):
        propagate(gaussian_packet(g, 10.0, 0.0), pot.Constant(0.0), PropagationConfig(dt=0.3, t_end=1.0))


def test_g1d_from_physical_hand_value():
    omega = 2 * math.pi * 400.0
    a_perp = math.pi * HBAR / (M_RB * omega)
    g_si = 4 * math.pi * HBAR**2 * A_S * 1000 / (M_RB * a_perp)
    expected = g_si / KB * 1e12  # uK*um
    assert g1d_from_physical(1000, omega) == pytest.approx(expected, rel=1e-12)
    assert g1d_from_physical(2000, omega) == pytest.approx(2 * expected, rel=1e-12)
    assert g1d_from_physical(0, omega) == 0.0


def test_transverse_reduction_reproduces_quoted_peak_density():
    # N |psi(0)|^2 / a_perp for the 10 um packet, N = 1000, 2 pi x 400 Hz
    omega = 2 * math.pi * 400.0
    a_perp_um2 = math.pi * HBAR / (M_RB * omega) * 1e12
    n_peak = 1000 / (SIGMA_10 * math.sqrt(math.pi)) / a_perp_um2 * 1e12
    assert n_peak == pytest.approx(1.45e14, rel=0.01)
    g = g1d_from_physical(1000, omega)
    assert peak_density_cm3(g, 1 / (SIGMA_10 * math.sqrt(math.pi))) == pytest.approx(n_peak, rel=1e-10)


def test_density_parameterization_round_trip():
    g = g1d_from_density(1e15, 0.1)
    assert peak_density_cm3(g, 0.1) == pytest.approx(1e15, rel=1e-12)
    assert interaction_energy_uK(1e15) == pytest.approx(0.35, rel=0.02)


def test_free_dispersion_matches_closed_form():
    g = Grid1D(-30.0, 100.0, 2**13)
    wf = gaussian_packet(g, 10.0, 10.0)
    traj = propagate(wf, pot.Constant(0.0), PropagationConfig(dt=1.0, t_end=600.0, snapshot_every=50))
    w0 = traj.observables[0].width_dx
    for t, o in zip(traj.times, traj.observables):
        assert o.width_dx == pytest.approx(dispersed_width(w0, SIGMA_10, t), rel=1e-6)
        assert o.mean_x == pytest.approx(0.1 * t, abs=1e-8)


def test_norm_conserved_over_1e5_steps():
    g = Grid1D(-20.0, 20.0, 256)
    wf = gaussian_packet(g, 6.0, 0.0)
    trap = pot.Harmonic(0.05)
    traj = propagate(wf, trap, PropagationConfig(dt=0.01, t_end=1000.0, snapshot_every=100_000))
    assert abs(traj.final.norm() - 1.0) < 1e-10


def test_energy_conserved_for_static_potential_with_interaction():
    g = Grid1D(-40.0, 40.0, 2**10)
    wf = gaussian_packet(g, 10.0, 0.0, x0=3.0)
    trap = pot.Harmonic(harmonic_curvature_for_sigma(3.0))
    g1d = 0.5
    e0 = energy(wf, trap, g1d)
    traj = propagate(wf, trap, PropagationConfig(dt=0.5, t_end=2000.0, snapshot_every=400, g1d=g1d, keep_states=True))
    drift = max(abs(energy(s, trap, g1d) - e0) for s in traj.snapshots + [traj.final])
    assert drift / abs(e0) < 1e-6


def test_vanishing_coupling_matches_linear_evolution():
    g = Grid1D(-25.0, 55.0, 2**13)
    wf = gaussian_packet(g, 10.0, 10.0)
    cfg = PropagationConfig(dt=0.25, t_end=300.0, snapshot_every=1200)
    a = propagate(wf, FOCUS, cfg).final.density()
    b = propagate(wf, FOCUS, PropagationConfig(dt=0.25, t_end=300.0, snapshot_every=1200, g1d=1e-12)).final.density()
    assert np.max(np.abs(a - b)) < 1e-8


def test_second_order_in_time_step():
    g = Grid1D(-25.0, 55.0, 2**13)
    wf = gaussian_packet(g, 10.0, 10.0)

    def final(dt):
        tr = propagate(wf, FOCUS, PropagationConfig(dt=dt, t_end=300.0, snapshot_every=10**6))
        o = observables(tr.final)
        return np.array([o.mean_x, o.width_dx, o.mean_p])

    a, b, c = final(1.0), final(0.5), final(0.25)
    order = math.log2(np.linalg.norm(a - b) / np.linalg.norm(b - c))
    assert order >= 1.9


def test_galilean_boost():
    g = Grid1D(-40.0, 40.0, 2**13)
    t = 100.0  # 0.1 um/us * 100 us = 10 um = 1024 cells
    cfg = PropagationConfig(dt=0.5, t_end=t, snapshot_every=1000)
    rest = propagate(gaussian_packet(g, 10.0, 0.0, x0=-10.0), pot.Constant(0.0), cfg).final
    moving = propagate(gaussian_packet(g, 10.0, 10.0, x0=-10.0), pot.Constant(0.0), cfg).final
    shift = int(round(0.1 * t / g.dx))
    assert shift == 1024
    np.testing.assert_allclose(moving.density(), np.roll(rest.density(), shift), atol=1e-8, rtol=0)


def test_snapshot_cadence_and_trajectory_times():
    g = Grid1D(-40.0, 40.0, 2**10)
    tr = propagate(gaussian_packet(g, 10.0, 0.0), pot.Constant(0.0), PropagationConfig(dt=1.0, t_end=25.0, snapshot_every=10))
    assert tr.times == [0.0, 10.0, 20.0, 25.0]
    assert len(tr.observables) == 4
    assert np.all(np.diff(tr.times) > 0)


def test_nan_is_reported_with_step():
    class Bad:
        def evaluate(self, x, t):
            return np.full_like(x, np.nan) if t > 2.0 else np.zeros_like(x)

        def envelope(self, t):
            return 1.0

    g = Grid1D(-40.0, 40.0, 2**10)
    with pytest.raises(NumericalError, match="step 3"):
        propagate(gaussian_packet(g, 10.0, 0.0), Bad(), PropagationConfig(dt=1.0, t_end=10.0))


def test_absorbing_boundary_flags_norm_loss():
    g = Grid1D(-25.0, 35.0, 2**13)
    wf = gaussian_packet(g, 10.0, 10.0)
    cfg = PropagationConfig(dt=0.5, t_end=300.0, snapshot_every=100, absorb_width=5.0)
    with pytest.warns(RuntimeWarning, match="absorbing"):
        tr = propagate(wf, pot.Constant(0.0), cfg)
    assert tr.absorbed_norm > 1e-3
    assert tr.warnings


def test_harmonic_ground_state_width():
    g = Grid1D(-30.0, 30.0, 2**10)
    sigma = 3.0
    trap = pot.Harmonic(harmonic_curvature_for_sigma(sigma))
    wf, info = imaginary_time_ground_state(trap, g, full_output=True)
    o = observables(wf)
    assert o.width_dx == pytest.approx(sigma / math.sqrt(2), rel=1e-6)
    omega = UNITS.hbar_over_m / sigma**2
    assert info.energy == pytest.approx(UNITS.internal_to_uK(0.5 * omega), rel=1e-6)


def test_ground_state_is_stationary():
    g = Grid1D(-30.0, 30.0, 2**10)
    trap = pot.Harmonic(harmonic_curvature_for_sigma(3.0))
    wf = imaginary_time_ground_state(trap, g, g1d=0.3)
    tr = propagate(wf, trap, PropagationConfig(dt=1.0, t_end=500.0, snapshot_every=1000, g1d=0.3))
    assert np.max(np.abs(tr.final.density() - wf.density())) < 1e-8


def test_ground_state_idempotent():
    g = Grid1D(-30.0, 30.0, 2**10)
    trap = pot.Harmonic(harmonic_curvature_for_sigma(3.0))
    wf, info = imaginary_time_ground_state(trap, g, g1d=0.3, full_output=True)
    dtau = info.stages[-1]["dtau"]
    again, info2 = imaginary_time_ground_state(trap, g, g1d=0.3, initial=wf, dtau=dtau, n_refine=0, full_output=True)
    assert info2.stages[0]["checks"] <= 2
    assert np.max(np.abs(again.density() - wf.density())) < 1e-8


def test_thomas_fermi_limit_and_virial():
    g = Grid1D(-40.0, 40.0, 2**11)
    kappa = 0.02  # uK/um^2
    g1d = 20.0  # uK*um
    trap = pot.Harmonic(kappa)
    wf = imaginary_time_ground_state(trap, g, g1d=g1d)
    mu_tf = (3 * g1d * math.sqrt(kappa) / (4 * math.sqrt(2))) ** (2 / 3)
    rho = wf.density()
    assert rho.max() == pytest.approx(mu_tf / g1d, rel=0.03)
    tf = np.maximum(mu_tf - 0.5 * kappa * g.x**2, 0) / g1d
    assert np.sum(np.abs(rho - tf)) * g.dx < 0.03
    parts = energy_components(wf, trap, g1d)
    virial = 2 * parts["kinetic"] - 2 * parts["potential"] + parts["interaction"]
    assert abs(virial) < 1e-6 * (parts["potential"] + parts["interaction"])
    e_nonint = UNITS.internal_to_uK(0.5 * math.sqrt(kappa * UNITS.uK * UNITS.hbar_over_m))
    assert energy(wf, trap, g1d) > e_nonint


def test_ground_state_rejects_non_confining_potential():
    g = Grid1D(-10.0, 10.0, 2**8)
    with pytest.raises((DomainError, NumericalError)):
        imaginary_time_ground_state(pot.Constant(0.0), g, max_steps=2000)


def test_interaction_broadens_early_width():
    g = Grid1D(-25.0, 55.0, 2**13)
    wf = gaussian_packet(g, 10.0, 10.0)
    lin = propagate(wf, FOCUS, PropagationConfig(dt=0.25, t_end=100.0, snapshot_every=40))
    g1d = g1d_from_density(1e15, float(wf.density().max()))
    bec = propagate(wf, FOCUS, PropagationConfig(dt=0.25, t_end=100.0, snapshot_every=40, g1d=g1d))
    assert np.all(bec.series("width_dx")[1:] > lin.series("width_dx")[1:])
