import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mwshape import objectives as obj
from mwshape import potentials as pot
from mwshape.core import DomainError, Grid1D, WaveFunction, gaussian_packet, observables
from mwshape.propagator import PropagationConfig, Trajectory, propagate

GRID = Grid1D(-60.0, 60.0, 2**13)


def state_from_density(rho, grid=GRID, t=0.0):
    return WaveFunction(grid, np.sqrt(rho).astype(complex), t)


def gaussian_density(x, c, s):
    return np.exp(-((x - c) ** 2) / s**2) / (s * math.sqrt(math.pi))


def traj_of(*states):
    tr = Trajectory()
    for s in states:
        tr.times.append(s.time)
        tr.observables.append(observables(s))
        tr.snapshots.append(s)
    return tr


def test_objective_spec_validation():
    with pytest.raises(ValueError):
        obj.ObjectiveSpec("juggle")
    with pytest.raises(DomainError):
        obj.ObjectiveSpec("accelerate", factor=0.0)
    with pytest.raises(DomainError):
        obj.ObjectiveSpec("split_three", (0.0, 300.0), eval_time=400.0)


def test_focus_minimum_parabolic_refinement():
    t = np.arange(0.0, 10.0, 1.0)
    w = (t - 4.3) ** 2 + 0.5
    tv, wv = obj.focus_minimum(t, w)
    assert tv == pytest.approx(4.3, abs=1e-12)
    assert wv == pytest.approx(0.5, abs=1e-12)


def test_free_packet_focus_cost_is_initial_width():
    g = Grid1D(-40.0, 80.0, 2**13)
    wf = gaussian_packet(g, 10.0, 10.0)
    tr = propagate(wf, pot.Constant(0.0), PropagationConfig(dt=1.0, t_end=300.0, snapshot_every=20))
    assert obj.cost_focus(tr) == pytest.approx(tr.observables[0].width_dx, rel=1e-12)


def test_trivial_task_costs_without_potential():
    g = Grid1D(-40.0, 80.0, 2**13)
    wf = gaussian_packet(g, 10.0, 10.0)
    off = pot.CosineWell(0.0, 0.0, 1.0, 10.0)
    tr = propagate(wf, off, PropagationConfig(dt=1.0, t_end=200.0, snapshot_every=50))
    assert obj.cost_accelerate(tr, 1.0, off) < 1e-9
    assert obj.cost_reflect(tr, off) == pytest.approx(20.0, rel=1e-9)
    assert obj.cost_stop(tr, off) == pytest.approx(1.0, rel=1e-9)


def test_costs_refuse_window_ending_while_potential_is_on():
    g = Grid1D(-40.0, 80.0, 2**13)
    wf = gaussian_packet(g, 10.0, 10.0)
    on = pot.CosineWell(10.0, 100.0, 50.0, 10.0)
    tr = propagate(wf, on, PropagationConfig(dt=1.0, t_end=100.0, snapshot_every=50))
    for f in (lambda: obj.cost_accelerate(tr, 2.0, on), lambda: obj.cost_reflect(tr, on), lambda: obj.cost_stop(tr, on)):
        with pytest.raises(DomainError):
            f()
    with pytest.warns(RuntimeWarning):
        obj.cost_focus(tr, on)


def test_decompose_symmetric_double_gaussian():
    x = GRID.x
    rho = 0.5 * gaussian_density(x, -15, 4) + 0.5 * gaussian_density(x, 15, 4)
    dec = obj.decompose_peaks(state_from_density(rho), 2)
    np.testing.assert_allclose(dec.norms, [0.5, 0.5], atol=1e-6)
    assert np.all(np.diff(dec.boundaries) > 0)
    assert dec.boundaries[0] == GRID.x_min and dec.boundaries[-1] == GRID.x_max


def test_decompose_three_peaks_4_2_1():
    x = GRID.x
    w = np.array([4, 2, 1]) / 7
    rho = sum(wi * gaussian_density(x, c, 2.0) for wi, c in zip(w, (-30, 0, 30)))
    dec = obj.decompose_peaks(state_from_density(rho), 3)
    # brute-force oracle: integrate each third directly between the midpoints
    dx = GRID.dx
    brute = [rho[x < -15].sum() * dx, rho[(x >= -15) & (x < 15)].sum() * dx, rho[x >= 15].sum() * dx]
    np.testing.assert_allclose(dec.norms, w, atol=1e-4)
    np.testing.assert_allclose(dec.norms, brute, atol=1e-8)
    assert obj.split_deviation(dec.norms) < 1e-4


def test_decompose_reports_missing_peaks():
    x = GRID.x
    with pytest.raises(obj.PeakError, match="found 1 peak"):
        obj.decompose_peaks(state_from_density(gaussian_density(x, 0, 3)), 2)


def test_decompose_ignores_fringes():
    x = GRID.x
    rho = (0.5 * gaussian_density(x, -20, 4) + 0.5 * gaussian_density(x, 20, 4)) * (1 + 0.3 * np.cos(40 * x))
    dec = obj.decompose_peaks(state_from_density(rho / (rho.sum() * GRID.dx)), 2)
    np.testing.assert_allclose(dec.norms, [0.5, 0.5], atol=1e-3)


@given(st.lists(st.floats(0.05, 1.0), min_size=3, max_size=3), st.floats(1.0, 3.0))
def test_decomposition_norms_sum_to_total(weights, width):
    x = GRID.x
    rho = sum(w * gaussian_density(x, c, width) for w, c in zip(weights, (-30, 0, 30)))
    wf = state_from_density(rho)
    dec = obj.decompose_peaks(wf, 3)
    assert abs(dec.norms.sum() - wf.norm()) < 1e-9


def test_split_deviation_zero_at_target():
    assert obj.split_deviation(np.array([4, 2, 1]) / 7) == 0.0
    assert obj.split_deviation([0.5, 0.3, 0.2]) == pytest.approx(
        math.sqrt((0.5 - 4 / 7) ** 2 + (0.3 - 2 / 7) ** 2 + (0.2 - 1 / 7) ** 2))


def test_split_two_exact_target_anywhere_costs_zero():
    s, sep = 3.0, 12.0
    for c in (-11.3, 0.0, 7.77):
        rho = obj.double_gaussian(GRID.x, s, sep, c)
        assert obj.translated_l2(state_from_density(rho), s, sep) < 1e-6


def test_split_two_single_gaussian_closed_form():
    s, sep = 3.0, 12.0  # sep = 4 s
    c = 1.0 / (s * math.sqrt(2 * math.pi))
    # best rigid shift puts one target peak on the Gaussian
    d2 = c * (0.5 - 0.5 * math.exp(-8.0))
    rho = gaussian_density(GRID.x, 5.0, s)
    assert obj.translated_l2(state_from_density(rho), s, sep) == pytest.approx(math.sqrt(d2), rel=1e-6)
    # the centred alignment is a worse, stationary point
    centred = c * (1.5 - 2 * math.exp(-2.0) + 0.5 * math.exp(-8.0))
    assert centred > d2


@given(st.integers(-800, 800))
def test_split_two_translation_invariance(n_cells):
    s, sep = 3.0, 12.0
    x = GRID.x
    rho = 0.6 * gaussian_density(x, -7, 3.5) + 0.4 * gaussian_density(x, 6, 2.5)
    wf = state_from_density(rho)
    a = obj.translated_l2(wf, s, sep)
    b = obj.translated_l2(wf.shifted(n_cells), s, sep)
    assert abs(a - b) <= 1e-10


def test_split_two_penalty_when_never_split():
    x = GRID.x
    wf = state_from_density(gaussian_density(x, 0, 3.0))
    cost = obj.cost_split_two(traj_of(wf), separation=12.0, sigma=3.0)
    target = obj.double_gaussian(x, 3.0, 12.0)
    assert cost == pytest.approx(10 * math.sqrt(np.dot(target, target) * GRID.dx))


def test_split_three_uses_state_at_eval_time():
    x = GRID.x
    w = np.array([4, 2, 1]) / 7
    rho = sum(wi * gaussian_density(x, c, 2.0) for wi, c in zip(w, (-30, 0, 30)))
    tr = traj_of(state_from_density(gaussian_density(x, 0, 3), t=0.0), state_from_density(rho, t=400.0))
    assert obj.cost_split_three(tr, (4, 2, 1), 400.0) < 1e-4
    with pytest.raises(DomainError):
        obj.cost_split_three(tr, (4, 2, 1), 350.0)


def test_fringe_visibility():
    x = GRID.x
    env = np.sqrt(gaussian_density(x, 0, 5.0))

    def two_waves(a, b):
        return WaveFunction(GRID, env * (a * np.exp(15j * x) + b * np.exp(-15j * x)))

    # equal amplitudes give full contrast; visibility of a, b waves is 2ab/(a^2 + b^2)
    assert obj.fringe_visibility(two_waves(1.0, 1.0), 0.0, 0.3) > 0.999
    assert obj.fringe_visibility(two_waves(1.0, 2 - math.sqrt(3)), 0.0, 0.3) == pytest.approx(0.5, abs=0.01)
    # fringes four grid points wide: raw samples miss the nodes, interpolation does not
    fine = WaveFunction(GRID, env * np.cos(0.5 * np.pi / GRID.dx * x + np.pi / 4))
    assert obj.fringe_visibility(fine, 0.0, 0.3, upsample=1) < 0.9
    assert obj.fringe_visibility(fine, 0.0, 0.3) > 0.999


def test_costs_non_negative_on_random_trajectories():
    g = Grid1D(-40.0, 80.0, 2**12)
    r = np.random.default_rng(5)
    for _ in range(3):
        V0, t0, tau, sx = r.uniform(5, 60), r.uniform(20, 60), r.uniform(5, 15), r.uniform(10, 40)
        p = pot.CosineWell(V0, t0, tau, sx, 0.0, pot.FixedCenter(5.0))
        tr = propagate(gaussian_packet(g, 10.0, 5.0), p, PropagationConfig(dt=0.5, t_end=150.0, snapshot_every=20))
        for c in (obj.cost_accelerate(tr, 2.0, p), obj.cost_reflect(tr, p), obj.cost_stop(tr, p), obj.cost_focus(tr)):
            assert c >= 0
