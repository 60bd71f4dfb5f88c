"""Box-bounded Nelder-Mead simplex with random-walk restarts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ContractError, NumericalError

ALPHA, GAMMA, RHO, SIGMA = 1.0, 2.0, 0.5, 0.5


@dataclass
class OptimizationProblem:
    objective: Callable[[np.ndarray], float]
    x0: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    max_evals: int = 500
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        n = self.x0.size
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ContractError("bounds must match the number of free parameters")
        if np.any(self.lower >= self.upper):
            raise ContractError("every lower bound must be below its upper bound")
        if np.any(self.x0 < self.lower) or np.any(self.x0 > self.upper):
            raise ContractError(f"initial guess {self.x0} outside bounds")
        if self.max_evals < 1:
            raise ContractError("max_evals must be >= 1")

    @property
    def dim(self) -> int:
        return self.x0.size


@dataclass
class OptimizationResult:
    x: np.ndarray
    fun: float
    n_evals: int
    n_restarts: int
    converged: bool
    log: list = field(default_factory=list)

    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate([f for _, f in self.log])


class _Budget(Exception):
    pass


class _Evaluator:
    """Clips, counts and logs objective calls against a shared budget."""

    def __init__(self, problem: OptimizationProblem, log: list):
        self.p = problem
        self.log = log

    def __call__(self, x: np.ndarray) -> float:
        if len(self.log) >= self.p.max_evals:
            raise _Budget
        x = np.clip(x, self.p.lower, self.p.upper)
        try:
            f = float(self.p.objective(x.copy()))
        except (ArithmeticError, ValueError, RuntimeError):
            f = np.inf
        if not np.isfinite(f):
            f = np.inf
        self.log.append((x.copy(), f))
        return f

    def best(self):
        i = int(np.argmin([f for _, f in self.log]))
        return self.log[i]


def _simplex_run(ev: _Evaluator, start: np.ndarray, scale: float, ftol: float, xtol: float) -> bool:
    """One Nelder-Mead descent from ``start``; returns True on convergence."""
    p = ev.p
    n = p.dim
    width = p.upper - p.lower
    pts = [np.clip(start, p.lower, p.upper)]
    for i in range(n):
        v = pts[0].copy()
        step = scale * width[i]
        v[i] = v[i] + step if v[i] + step <= p.upper[i] else v[i] - step
        pts.append(v)
    sim = np.array(pts)
    fs = np.array([ev(v) for v in sim])
    if not np.any(np.isfinite(fs)):
        raise NumericalError("objective is non-finite at every initial simplex vertex")

    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        spread = fs[-1] - fs[0]
        size = np.max(np.abs(sim[1:] - sim[0]) / width)
        if np.isfinite(spread) and spread < ftol and size < xtol:
            return True
        c = sim[:-1].mean(axis=0)
        xr = np.clip(c + ALPHA * (c - sim[-1]), p.lower, p.upper)
        fr = ev(xr)
        if fr < fs[0]:
            xe = np.clip(c + GAMMA * (xr - c), p.lower, p.upper)
            fe = ev(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = np.clip(c + RHO * (xr - c), p.lower, p.upper)
            fc = ev(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = np.clip(c + RHO * (sim[-1] - c), p.lower, p.upper)
            fc = ev(xc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        for i in range(1, n + 1):
            sim[i] = sim[0] + SIGMA * (sim[i] - sim[0])
            fs[i] = ev(sim[i])


def nelder_mead(
    problem: OptimizationProblem,
    simplex_scale: float = 0.05,
    ftol: float = 1e-10,
    xtol: float = 1e-8,
) -> OptimizationResult:
    """Minimize ``problem.objective`` inside its box.

    Proposed vertices are clipped to the bounds. Iteration stops when both
    the spread of costs across the simplex is below ``ftol`` (absolute) and
    the simplex edge lengths are below ``xtol`` (relative to the box), or
    when the evaluation budget is spent. Non-finite costs count as +inf.
    """
    return random_walk_restarts(problem, 0, simplex_scale=simplex_scale, ftol=ftol, xtol=xtol)


def random_walk_restarts(
    problem: OptimizationProblem,
    n_restarts: int,
    step_fraction: float = 0.2,
    seed: int = 0,
    simplex_scale: float = 0.05,
    ftol: float = 1e-10,
    xtol: float = 1e-8,
) -> OptimizationResult:
    """Nelder-Mead followed by ``n_restarts`` random-walk kicks of the best point.

    Each kick adds uniform noise of +-``step_fraction`` of the box width per
    coordinate before a fresh descent. All randomness comes from ``seed``.
    """
    if n_restarts < 0:
        raise ContractError("n_restarts must be >= 0")
    log: list = []
    ev = _Evaluator(problem, log)
    if problem.dim == 0:
        f = ev(problem.x0)
        return OptimizationResult(problem.x0.copy(), f, 1, 0, True, log)

    rng = np.random.default_rng(seed)
    width = problem.upper - problem.lower
    start = problem.x0
    converged = False
    restarts = 0
    try:
        converged = _simplex_run(ev, start, simplex_scale, ftol, xtol)
        for _ in range(n_restarts):
            best_x, _ = ev.best()
            start = np.clip(best_x + rng.uniform(-1.0, 1.0, problem.dim) * step_fraction * width,
                            problem.lower, problem.upper)
            restarts += 1
            converged = _simplex_run(ev, start, simplex_scale, ftol, xtol)
    except _Budget:
        converged = False
    best_x, best_f = ev.best()
    return OptimizationResult(best_x.copy(), best_f, len(log), restarts, converged, log)
