"""Post-processing of sweep rows: log-tension fits and convergence gaps."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from app.models import SweepRow

MIN_FIT_POINTS = 3


@dataclass(frozen=True, slots=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int

    def as_dict(self) -> dict[str, float | int]:
        return asdict(self)


def fit_log_tension(
    temperatures: Sequence[float],
    sigmas: Sequence[float | None],
    window: tuple[float, float] | None = None,
) -> LinearFit | None:
    """Least-squares line through (T, ln sigma) over points with sigma > 0.

    Returns None when fewer than three usable points remain.
    """
    t = np.asarray(temperatures, dtype=float)
    s = np.asarray([np.nan if v is None else v for v in sigmas], dtype=float)
    mask = np.isfinite(s) & (s > 0)
    if window is not None:
        mask &= (t >= window[0]) & (t <= window[1])
    if int(mask.sum()) < MIN_FIT_POINTS:
        return None
    x, y = t[mask], np.log(s[mask])
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - float(np.sum(residual**2)) / total if total > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r_squared, int(mask.sum()))


def _log_or_nan(value: float | None) -> float:
    return math.log(value) if value is not None and value > 0 else math.nan


def log_tension_frame(rows: Iterable[SweepRow]) -> pd.DataFrame:
    """T, beta, epsilon, ln_sigma_var, ln_sigma_exact for rows with a positive tension."""
    records = [
        {
            "T": row.T,
            "beta": row.beta,
            "epsilon": row.epsilon,
            "ln_sigma_var": _log_or_nan(row.sigma_var),
            "ln_sigma_exact": _log_or_nan(row.sigma_exact),
        }
        for row in rows
    ]
    frame = pd.DataFrame.from_records(
        records, columns=["T", "beta", "epsilon", "ln_sigma_var", "ln_sigma_exact"]
    )
    return frame.dropna(subset=["ln_sigma_var", "ln_sigma_exact"], how="all").reset_index(drop=True)


def tension_fits(rows: Sequence[SweepRow], window: tuple[float, float] | None = None) -> dict[str, dict]:
    """Per-epsilon fits of ln sigma vs T for both the variational and exact columns."""
    fits: dict[str, dict] = {}
    for eps in dict.fromkeys(row.epsilon for row in rows):
        subset = sorted((r for r in rows if r.epsilon == eps), key=lambda r: r.T)
        temps = [r.T for r in subset]
        entry = {}
        for column in ("sigma_var", "sigma_exact"):
            fit = fit_log_tension(temps, [getattr(r, column) for r in subset], window)
            entry[column] = fit.as_dict() if fit else None
        fits[repr(eps)] = entry
    return fits


def is_strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def tension_trends(rows: Sequence[SweepRow]) -> dict[str, dict[str, bool | None]]:
    """Whether sigma decreases strictly with T, per (epsilon, mu) slice."""
    trends: dict[str, dict[str, bool | None]] = {}
    slices = dict.fromkeys((r.epsilon, r.mu) for r in rows)
    for eps, mu in slices:
        subset = sorted((r for r in rows if r.epsilon == eps and r.mu == mu), key=lambda r: r.T)
        entry: dict[str, bool | None] = {}
        for column in ("sigma_var", "sigma_exact"):
            values = [getattr(r, column) for r in subset]
            entry[column] = None if any(v is None for v in values) else is_strictly_decreasing(values)
        trends[f"epsilon={eps!r},mu={mu!r}"] = entry
    return trends


def convergence_gaps(rows: Sequence[SweepRow]) -> dict[str, dict]:
    """|F_var - F_exact| by depth for each beta, and whether it shrinks with depth."""
    summary: dict[str, dict] = {}
    for beta in dict.fromkeys(row.beta for row in rows):
        subset = sorted(
            (r for r in rows if r.beta == beta and r.F_var is not None and r.F_exact is not None),
            key=lambda r: r.depth,
        )
        gaps = {str(r.depth): abs(r.F_var - r.F_exact) for r in subset}
        values = list(gaps.values())
        summary[repr(beta)] = {
            "gaps": gaps,
            "relative_gaps": {str(r.depth): abs(r.F_var - r.F_exact) / abs(r.F_exact) for r in subset if r.F_exact},
            "non_increasing": all(b <= a + 1e-12 for a, b in zip(values, values[1:])),
        }
    return summary
