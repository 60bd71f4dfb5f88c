"""Scalar costs mapping a trajectory to a number to minimize."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from .core import ContractError, DomainError, WaveFunction
from .propagator import Trajectory

SWITCHED_OFF = 1e-6


class PeakError(DomainError):
    """Fewer density maxima than requested."""


@dataclass(frozen=True)
class ObjectiveSpec:
    """Which task to score and over which time window (us).

    ``task`` is one of ``focus``, ``accelerate``, ``reflect``, ``stop``,
    ``split_two``, ``split_three``.
    """

    task: str
    window: tuple = (0.0, 600.0)
    factor: float = 2.0
    separation: Optional[float] = None
    ratios: tuple = (4.0, 2.0, 1.0)
    eval_time: float = 400.0

    def __post_init__(self):
        known = {"focus", "accelerate", "reflect", "stop", "split_two", "split_three"}
        if self.task not in known:
            raise ContractError(f"unknown task {self.task!r}; expected one of {sorted(known)}")
        if not self.factor > 0:
            raise DomainError("factor must be positive")
        if any(r <= 0 for r in self.ratios):
            raise DomainError("ratios must be positive")
        if self.task == "split_three" and not (self.window[0] <= self.eval_time <= self.window[1]):
            raise DomainError("eval_time must lie inside the window")


@dataclass
class PeakDecomposition:
    boundaries: np.ndarray
    norms: np.ndarray
    peaks: np.ndarray = field(default=None)


def _require_switched_off(potential, t_end: float):
    if potential is not None and potential.envelope(t_end) >= SWITCHED_OFF:
        raise DomainError(
            f"potential still on at the end of the window (envelope {potential.envelope(t_end):.3g} at t={t_end} us)"
        )


def focus_minimum(times: Sequence[float], widths: Sequence[float]) -> tuple:
    """(t_min, width_min) with a parabola through the three samples around the minimum."""
    t = np.asarray(times, dtype=float)
    w = np.asarray(widths, dtype=float)
    if t.size < 2:
        raise DomainError("need at least two snapshots")
    i = int(np.argmin(w))
    if i == 0 or i == w.size - 1:
        return float(t[i]), float(w[i])
    t0, t1, t2 = t[i - 1 : i + 2]
    w0, w1, w2 = w[i - 1 : i + 2]
    # Lagrange parabola vertex
    d = (t0 - t1) * (t0 - t2) * (t1 - t2)
    a = (t2 * (w1 - w0) + t1 * (w0 - w2) + t0 * (w2 - w1)) / d
    b = (t2**2 * (w0 - w1) + t1**2 * (w2 - w0) + t0**2 * (w1 - w2)) / d
    if a <= 0:
        return float(t1), float(w1)
    tv = -b / (2 * a)
    c = w1 - a * t1**2 - b * t1
    wv = c - b * b / (4 * a)
    return float(tv), float(min(max(wv, 0.0), w1))


def cost_focus(traj: Trajectory, potential=None) -> float:
    """Smallest rms width (um) over the trajectory."""
    if potential is not None and potential.envelope(traj.times[-1]) >= SWITCHED_OFF:
        warnings.warn("focus window ends before the potential is switched off", RuntimeWarning, stacklevel=2)
    return focus_minimum(traj.times, traj.series("width_dx"))[1]


def cost_accelerate(traj: Trajectory, factor: float = 2.0, potential=None) -> float:
    """|E_kin(final) - factor * E_kin(initial)| in uK."""
    _require_switched_off(potential, traj.times[-1])
    e = traj.series("kinetic_energy")
    return float(abs(e[-1] - factor * e[0]))


def cost_reflect(traj: Trajectory, potential=None) -> float:
    """|<p>_final + p_0| as a velocity (cm/s)."""
    _require_switched_off(potential, traj.times[-1])
    p = traj.series("mean_p")
    return float(abs(p[-1] + p[0]))


def cost_stop(traj: Trajectory, potential=None) -> float:
    """Remaining fraction of the initial kinetic energy."""
    _require_switched_off(potential, traj.times[-1])
    e = traj.series("kinetic_energy")
    return float(e[-1] / e[0])


def decompose_peaks(wf: WaveFunction, expected_peaks: int, smoothing: float = 0.5) -> PeakDecomposition:
    """Split the density into ``expected_peaks`` segments and integrate each.

    The density is smoothed with a Gaussian kernel of ``smoothing`` um to
    suppress interference fringes. The most prominent maxima are kept and
    segments are cut at the lowest smoothed density between neighbours.
    """
    if expected_peaks < 1:
        raise ContractError("expected_peaks must be >= 1")
    g = wf.grid
    rho = wf.density()
    smooth = gaussian_filter1d(rho, smoothing / g.dx, mode="wrap")
    idx, props = find_peaks(smooth, prominence=1e-6 * smooth.max())
    if idx.size < expected_peaks:
        raise PeakError(
            f"found {idx.size} peak(s) at x = {np.round(g.x[idx], 3).tolist()}, expected {expected_peaks}"
        )
    keep = np.sort(idx[np.argsort(props["prominences"])[::-1][:expected_peaks]])
    cuts = [0]
    for a, b in zip(keep[:-1], keep[1:]):
        cuts.append(a + int(np.argmin(smooth[a:b])))
    cuts.append(g.n_points)
    norms = np.array([rho[a:b].sum() * g.dx for a, b in zip(cuts[:-1], cuts[1:])])
    boundaries = np.array([g.x_min] + [g.x[c] for c in cuts[1:-1]] + [g.x_max])
    return PeakDecomposition(boundaries=boundaries, norms=norms, peaks=g.x[keep])


def split_deviation(norms: Sequence[float], ratios: Sequence[float] = (4, 2, 1)) -> float:
    r = np.asarray(ratios, dtype=float)
    n = np.asarray(norms, dtype=float)
    if n.shape != r.shape:
        raise ContractError(f"{n.size} norms for {r.size} target ratios")
    return float(np.sqrt(np.sum((n - r / r.sum()) ** 2)))


def cost_split_three(traj: Trajectory, ratios: Sequence[float] = (4, 2, 1), eval_time: float = 400.0) -> float:
    """Distance of the peak norms at ``eval_time`` from the target ratios."""
    wf = traj.state_at(eval_time)
    dec = decompose_peaks(wf, len(ratios))
    return split_deviation(dec.norms, ratios)


def double_gaussian(x: np.ndarray, sigma: float, separation: float, center: float = 0.0) -> np.ndarray:
    """Two copies of the density exp(-x^2/sigma^2)/(sigma sqrt(pi)), half norm each."""
    def g(c):
        return np.exp(-((x - c) ** 2) / sigma**2) / (sigma * np.sqrt(np.pi))

    return 0.5 * (g(center - 0.5 * separation) + g(center + 0.5 * separation))


def translated_l2(wf: WaveFunction, sigma: float, separation: float) -> float:
    """min over rigid shifts of || rho/N - double_gaussian ||_2.

    The target is first centred on the density centroid, then shifts within
    +-(separation + 4 sigma) are scanned and the best one refined.
    """
    g = wf.grid
    rho = wf.density()
    rho = rho / (rho.sum() * g.dx)
    x = g.x
    centroid = float(np.dot(rho, x) * g.dx)
    u = x - centroid

    def dist2(s):
        d = rho - double_gaussian(u, sigma, separation, s)
        return float(np.dot(d, d) * g.dx)

    reach = separation + 4 * sigma
    scan = np.linspace(-reach, reach, 161)
    vals = np.array([dist2(s) for s in scan])
    j = int(np.argmin(vals))
    step = scan[1] - scan[0]
    res = minimize_scalar(dist2, bounds=(scan[j] - step, scan[j] + step), method="bounded",
                          options={"xatol": 1e-6})
    return float(np.sqrt(min(res.fun, vals[j])))


def cost_split_two(traj: Trajectory, separation: Optional[float] = None, sigma: Optional[float] = None) -> float:
    """Best match over stored snapshots to a double Gaussian of the initial shape.

    ``sigma`` defaults to sqrt(2) times the initial rms width (the Gaussian
    amplitude parameter) and ``separation`` to 4 sigma. Snapshots that do not
    show two peaks are skipped; if none does, a penalty of ten times the
    target's own L2 norm is returned.
    """
    states = list(traj.snapshots) or ([traj.final] if traj.final is not None else [])
    if not states:
        raise DomainError("trajectory holds no states; propagate with keep_states=True")
    if sigma is None:
        sigma = np.sqrt(2.0) * traj.observables[0].width_dx
    if separation is None:
        separation = 4.0 * sigma
    best = np.inf
    for wf in states:
        try:
            decompose_peaks(wf, 2)
        except PeakError:
            continue
        best = min(best, translated_l2(wf, sigma, separation))
    if np.isfinite(best):
        return float(best)
    x = states[0].grid.x
    target = double_gaussian(x, sigma, separation)
    return float(10.0 * np.sqrt(np.dot(target, target) * states[0].grid.dx))


def fringe_visibility(
    wf: WaveFunction, center: Optional[float] = None, half_width: float = 0.25, upsample: int = 8
) -> float:
    """(max - min)/(max + min) of the density within ``center +- half_width``.

    ``center`` defaults to the density maximum. The amplitudes are first
    interpolated spectrally onto a grid ``upsample`` times finer, so fringes
    only a few grid points wide keep their true minima.
    """
    g = wf.grid
    if upsample < 1:
        raise DomainError("upsample must be >= 1")
    n = g.n_points * upsample
    spec = np.fft.fft(wf.amplitudes)
    padded = np.zeros(n, dtype=complex)
    h = g.n_points // 2
    padded[:h] = spec[:h]
    padded[-h:] = spec[-h:]
    rho = np.abs(np.fft.ifft(padded) * upsample) ** 2
    x = g.x_min + np.arange(n) * (g.dx / upsample)
    if center is None:
        center = float(x[np.argmax(rho)])
    sel = np.abs(x - center) <= half_width
    if sel.sum() < 3:
        raise DomainError("visibility window holds fewer than three grid points")
    hi, lo = rho[sel].max(), rho[sel].min()
    return float((hi - lo) / (hi + lo))


def crossing_time(traj: Trajectory, after: float = 0.0) -> tuple:
    """(t, width) at the minimum of the total rms width after ``after`` us."""
    t = np.asarray(traj.times)
    w = traj.series("width_dx")
    sel = t > after
    if sel.sum() < 2:
        raise DomainError("not enough snapshots after the requested time")
    return focus_minimum(t[sel], w[sel])


def evaluate_objective(spec: ObjectiveSpec, traj: Trajectory, potential=None) -> float:
    if spec.task == "focus":
        return cost_focus(traj, potential)
    if spec.task == "accelerate":
        return cost_accelerate(traj, spec.factor, potential)
    if spec.task == "reflect":
        return cost_reflect(traj, potential)
    if spec.task == "stop":
        return cost_stop(traj, potential)
    if spec.task == "split_two":
        return cost_split_two(traj, spec.separation)
    return cost_split_three(traj, spec.ratios, spec.eval_time)
