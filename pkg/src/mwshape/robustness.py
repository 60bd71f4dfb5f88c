"""One-at-a-time +-1% parameter perturbation analysis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import ContractError


@dataclass
class SensitivityReport:
    """Metric under +-``fraction`` changes of each free parameter.

    ``mean_abs_change`` holds, per parameter, the mean over the two runs of
    |metric - nominal| in percent of |nominal|.
    """

    names: list
    nominal_values: np.ndarray
    nominal_metric: float
    fraction: float
    plus: dict
    minus: dict
    mean_abs_change: dict
    failures: dict = field(default_factory=dict)

    def table(self, raw: bool = False, scale: float = 1.0, fmt: str = "{:.3f}") -> str:
        """Plain-text table: mean |change| % per parameter, or raw +/- rows."""
        if raw:
            head = "\t" + "\t".join(self.names)
            rows = [
                f"+{self.fraction:.0%}\t" + "\t".join(fmt.format(self.plus[n] * scale) for n in self.names),
                f"-{self.fraction:.0%}\t" + "\t".join(fmt.format(self.minus[n] * scale) for n in self.names),
            ]
            return "\n".join([head] + rows)
        return "\n".join(f"{n}\t{fmt.format(self.mean_abs_change[n])}" for n in self.names)


def sensitivity(
    evaluate: Callable[[np.ndarray], float],
    names: Sequence[str],
    values: Sequence[float],
    fraction: float = 0.01,
    executor=None,
) -> SensitivityReport:
    """Re-run ``evaluate`` with each parameter scaled by 1 +- ``fraction``.

    ``evaluate`` takes the full free-parameter vector in ``names`` order and
    returns the task metric. A failing run is recorded in ``failures`` (its
    metric becomes NaN) rather than dropped. ``executor`` may be any object
    with an ordered ``map``, e.g. a ``concurrent.futures`` pool.
    """
    values = np.asarray(values, dtype=float)
    names = list(names)
    if values.shape != (len(names),):
        raise ContractError(f"{len(names)} names for {values.size} values")
    nominal = float(evaluate(values.copy()))

    jobs = []
    for i in range(len(names)):
        for sign in (+1, -1):
            v = values.copy()
            v[i] = v[i] * (1 + sign * fraction)
            jobs.append(v)

    failures = {}

    def run(v):
        try:
            return float(evaluate(v))
        except Exception as exc:  # noqa: BLE001 - recorded, not swallowed
            return exc

    results = list(executor.map(run, jobs)) if executor is not None else [run(v) for v in jobs]
    plus, minus, change = {}, {}, {}
    for i, n in enumerate(names):
        out = []
        for sign, r in zip((+1, -1), results[2 * i : 2 * i + 2]):
            if isinstance(r, Exception):
                failures[f"{n}{'+' if sign > 0 else '-'}"] = repr(r)
                r = float("nan")
            (plus if sign > 0 else minus)[n] = r
            out.append(r)
        change[n] = float(np.mean([abs(r - nominal) for r in out]) / abs(nominal) * 100.0)
    return SensitivityReport(names, values, nominal, fraction, plus, minus, change, failures)
