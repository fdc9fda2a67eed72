"""Confidence intervals and log-log slope fits for Monte Carlo estimates."""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

Z975 = float(stats.norm.ppf(0.975))


def wilson_interval(successes: int, n: int) -> tuple[float, float]:
    """95% Wilson score interval for a Bernoulli proportion.

    Its half-width never exceeds the Wald bound z / (2 sqrt(n)) and stays
    positive at 0 and n successes.
    """
    if n <= 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(n)).proportion_ci(confidence_level=0.95,
                                                              method="wilson")
    return float(ci.low), float(ci.high)


def mean_interval(values: Sequence[float]) -> tuple[float, float, float]:
    """Mean with a 95% Student-t interval; infinite interval for a single value."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return math.nan, -math.inf, math.inf
    mean = float(values.mean())
    if len(values) < 2:
        return mean, -math.inf, math.inf
    sem = float(values.std(ddof=1)) / math.sqrt(len(values))
    half = float(stats.t.ppf(0.975, len(values) - 1)) * sem
    if half == 0:
        half = np.finfo(float).eps * max(1.0, abs(mean))
    return mean, mean - half, mean + half


@dataclass(frozen=True)
class SlopeFit:
    """Weighted least-squares line through log-log points."""

    slope: float
    intercept: float
    stderr: float
    n_points: int
    excluded: tuple[float, ...] = ()

    def within(self, target: float, tol: float) -> bool:
        return math.isfinite(self.slope) and abs(self.slope - target) <= tol


def fit_loglog_slope(x: Sequence[float], p: Sequence[float],
                     half_widths: Sequence[float] | None = None) -> SlopeFit:
    """Fit log p = a log x + b, weighting each point by its inverse CI variance.

    The variance of log p is taken as (half_width / (z p))^2. Points with
    p <= 0 are excluded and listed. The slope error uses the known point
    variances (no residual rescaling).
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    widths = np.ones_like(p) if half_widths is None else np.asarray(half_widths, dtype=float)
    usable = (p > 0) & np.isfinite(p) & (x > 0)
    excluded = tuple(float(v) for v in x[~usable])
    if usable.sum() < 2:
        return SlopeFit(math.nan, math.nan, math.inf, int(usable.sum()), excluded)
    lx, ly = np.log(x[usable]), np.log(p[usable])
    if half_widths is None:
        sigma = np.ones_like(ly)
    else:
        sigma = widths[usable] / (Z975 * p[usable])
        sigma = np.where(sigma > 0, sigma, sigma[sigma > 0].min() if np.any(sigma > 0) else 1.0)
    design = np.column_stack([lx, np.ones_like(lx)]) / sigma[:, None]
    coef, *_ = np.linalg.lstsq(design, ly / sigma, rcond=None)
    cov = np.linalg.pinv(design.T @ design)
    return SlopeFit(float(coef[0]), float(coef[1]), float(math.sqrt(max(cov[0, 0], 0.0))),
                    int(usable.sum()), excluded)
