"""The eps-kernel family f_eps, F_eps, G_eps and the Gaussian small-ball probability.

    f_eps(x) = min(eps / |x|^{1/2}, 1)^d
    F_eps(x) = int_0^1 f_eps(y + |x|) dy
    G_eps(x) = int_0^1 F_eps(y + |x|) dy

F_eps has a closed form; G_eps is integrated numerically from it.
"""
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from ..errors import DomainError
from ..utils.rng import derive_rng, stream_id
from .stats import wilson_interval

logger = logging.getLogger(__name__)

QUAD_RTOL = 1e-10
MIN_BALL_TRIALS = 10_000


@dataclass(frozen=True)
class EpsKernelParams:
    eps: float
    d: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise DomainError(f"eps must be positive, got {self.eps}")
        if int(self.d) < 1:
            raise DomainError(f"d must be >= 1, got {self.d}")

    @property
    def knee(self) -> float:
        """eps^2, where f_eps leaves its flat part."""
        return self.eps ** 2


def f_eps(p: EpsKernelParams, x: float | np.ndarray) -> float | np.ndarray:
    ax = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        tail = (p.eps / np.sqrt(ax)) ** p.d
    out = np.where(ax <= p.knee, 1.0, tail)
    return float(out) if out.ndim == 0 else out


def _power_integral(d: int, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    # int_{u1}^{u2} u^{-d/2} du
    if d == 2:
        return np.log(u2 / u1)
    e = 1.0 - d / 2.0
    return (u2 ** e - u1 ** e) / e


def F_eps(p: EpsKernelParams, x: float | np.ndarray) -> float | np.ndarray:
    """Closed form of int_0^1 f_eps(y + |x|) dy.

    Past the knee (|x| >= eps^2) it is eps^d int_{|x|}^{1+|x|} u^{-d/2} du;
    below, the flat part contributes min(eps^2 - |x|, 1).
    """
    a = np.abs(np.asarray(x, dtype=float))
    knee = p.knee
    with np.errstate(divide="ignore", invalid="ignore"):
        far = p.eps ** p.d * _power_integral(p.d, np.maximum(a, knee), 1.0 + a)
        flat = np.minimum(knee - a, 1.0)
        near = flat + np.where(knee < 1.0 + a, far, 0.0)
    out = np.where(a >= knee, far, near)
    return float(out) if out.ndim == 0 else out


def _breakpoints(p: EpsKernelParams, lo: float, hi: float) -> list[float]:
    return [b for b in (p.knee - 1.0, p.knee) if lo < b < hi]


def _quad(func, lo: float, hi: float, points: list[float]) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.quad(func, lo, hi, points=points or None, epsrel=QUAD_RTOL,
                                  epsabs=0.0, limit=400)
    return float(value)


def F_eps_quad(p: EpsKernelParams, x: float) -> float:
    """F_eps by direct quadrature of its definition (reference for the closed form)."""
    a = abs(float(x))
    return _quad(lambda y: f_eps(p, y), a, a + 1.0, _breakpoints(p, a, a + 1.0))


def _G_scalar(p: EpsKernelParams, x: float) -> float:
    a = abs(float(x))
    return _quad(lambda y: F_eps(p, y), a, a + 1.0, _breakpoints(p, a, a + 1.0))


def G_eps(p: EpsKernelParams, x: float | np.ndarray) -> float | np.ndarray:
    """int_0^1 F_eps(y + |x|) dy by adaptive quadrature at 1e-10 relative tolerance."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return _G_scalar(p, float(arr))
    flat = np.abs(arr).ravel()
    unique, inverse = np.unique(flat, return_inverse=True)
    values = np.array([_G_scalar(p, u) for u in unique])
    return values[inverse].reshape(arr.shape)


def G_eps_double(p: EpsKernelParams, x: float) -> float:
    """int int_{[0,1]^2} f_eps(|x| + y1 + y2) dy by nested quadrature."""
    a = abs(float(x))

    def inner_opts(y1: float) -> dict:
        kink = p.knee - a - y1
        opts = {"epsrel": QUAD_RTOL, "epsabs": 0.0, "limit": 200}
        if 0 < kink < 1:
            opts["points"] = [kink]
        return opts

    outer_points = [b for b in (p.knee - a - 1.0, p.knee - a) if 0 < b < 1]
    outer_opts = {"epsrel": QUAD_RTOL, "epsabs": 0.0, "limit": 200}
    if outer_points:
        outer_opts["points"] = outer_points
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.nquad(lambda y2, y1: f_eps(p, a + y1 + y2), [[0, 1], [0, 1]],
                                   opts=[inner_opts, outer_opts])
    return float(value)


def half_wide_F(p: EpsKernelParams, x: float) -> float:
    """(1/2) int_0^2 F_eps(x + y) dy."""
    a = abs(float(x))
    return 0.5 * _quad(lambda y: F_eps(p, y), a, a + 2.0, _breakpoints(p, a, a + 2.0))


@dataclass(frozen=True)
class BallProbability:
    estimate: float
    ci_lo: float
    ci_hi: float
    stderr: float
    trials: int


def gaussian_ball_prob(sigma: float, eps: float, d: int, trials: int,
                       seed: int = 0) -> BallProbability:
    """Monte Carlo P{sigma |g|_1 <= eps} for g a standard normal d-vector."""
    if not sigma > 0 or not eps > 0:
        raise DomainError(f"sigma and eps must be positive, got {sigma}, {eps}")
    if trials < MIN_BALL_TRIALS:
        raise DomainError(f"need at least {MIN_BALL_TRIALS} trials, got {trials}")
    rng = derive_rng(seed, stream_id("gaussian_ball"), d)
    hits = 0
    remaining = trials
    while remaining:
        batch = min(remaining, 1 << 18)
        norms = np.abs(rng.standard_normal((batch, d))).sum(axis=1)
        hits += int(np.count_nonzero(sigma * norms <= eps))
        remaining -= batch
    estimate = hits / trials
    lo, hi = wilson_interval(hits, trials)
    stderr = math.sqrt(max(estimate * (1 - estimate), 1.0 / trials) / trials)
    return BallProbability(estimate, lo, hi, stderr, trials)


def gaussian_ball_prob_exact(sigma: float, eps: float) -> float:
    """d = 1 closed form 2 Phi(eps / sigma) - 1."""
    return float(2.0 * stats.norm.cdf(eps / sigma) - 1.0)


def fit_upper_constant(values: np.ndarray, bounds: np.ndarray) -> float:
    """Smallest c with values <= c * bounds on the sample (max observed ratio)."""
    values, bounds = np.asarray(values, dtype=float), np.asarray(bounds, dtype=float)
    usable = np.isfinite(bounds) & (bounds > 0)
    return float(np.max(values[usable] / bounds[usable]))


def fit_lower_constant(values: np.ndarray, bounds: np.ndarray) -> float:
    """Smallest c with values >= bounds / c on the sample (max observed ratio)."""
    values, bounds = np.asarray(values, dtype=float), np.asarray(bounds, dtype=float)
    usable = np.isfinite(bounds) & (values > 0)
    return float(np.max(bounds[usable] / values[usable]))
