"""Compact subsets of the half-line and their size functionals.

Sets are finite unions of closed intervals with rational endpoints, so the
grid-cell counts (Minkowski content) and maximal separated subsets
(Kolmogorov entropy) are computed exactly with ``fractions.Fraction``.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational, Real
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from ..errors import DomainError, InconclusiveError

logger = logging.getLogger(__name__)

LOG_PLUS_FLOOR = 1.0
LOG_PLUS_POLICY = "log_+(y) = max(log y, 1)"


def as_fraction(value: object) -> Fraction:
    """Exact rational for an int, Fraction, decimal string or float (via its shortest repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Real):
        if not math.isfinite(float(value)):
            raise DomainError(f"endpoint must be finite, got {value}")
        return Fraction(repr(float(value)))
    raise DomainError(f"cannot read {value!r} as a rational number")


def log_plus(y: float | np.ndarray) -> float | np.ndarray:
    """log_+(y) = max(log y, 1) for y > 0."""
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(y), LOG_PLUS_FLOOR)


@dataclass(frozen=True)
class CompactSet1D:
    """Finite union of closed intervals [a, b] (a == b is a point), sorted and disjoint."""

    intervals: tuple[tuple[Fraction, Fraction], ...] = ()

    def __post_init__(self) -> None:
        pairs = []
        for pair in self.intervals:
            a, b = (as_fraction(v) for v in pair)
            if a > b:
                raise DomainError(f"interval [{a}, {b}] has a > b")
            if a < 0:
                raise DomainError(f"interval [{a}, {b}] is not in [0, inf)")
            pairs.append((a, b))
        pairs.sort()
        merged: list[tuple[Fraction, Fraction]] = []
        for a, b in pairs:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
            else:
                merged.append((a, b))
        object.__setattr__(self, "intervals", tuple(merged))

    @classmethod
    def of(cls, *pairs: tuple[object, object]) -> "CompactSet1D":
        return cls(tuple(pairs))

    @classmethod
    def from_points(cls, points: Iterable[object]) -> "CompactSet1D":
        return cls(tuple((p, p) for p in points))

    @classmethod
    def from_text(cls, text: str) -> "CompactSet1D":
        """Parse the canonical form ``"a,b;c,d"`` (a bare ``"a"`` is the point [a, a])."""
        pairs = []
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = [p.strip() for p in chunk.split(",")]
            if len(parts) == 1:
                parts = parts * 2
            if len(parts) != 2:
                raise DomainError(f"cannot parse interval '{chunk}'")
            try:
                pairs.append((Fraction(parts[0]), Fraction(parts[1])))
            except (ValueError, ZeroDivisionError) as exc:
                raise DomainError(f"cannot parse interval '{chunk}': {exc}") from exc
        return cls(tuple(pairs))

    def to_text(self) -> str:
        return ";".join(f"{a},{b}" for a, b in self.intervals)

    def __str__(self) -> str:
        return self.to_text()

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def is_finite(self) -> bool:
        return all(a == b for a, b in self.intervals)

    @property
    def length(self) -> Fraction:
        return sum((b - a for a, b in self.intervals), Fraction(0))

    @property
    def bounds(self) -> tuple[Fraction, Fraction]:
        if self.is_empty:
            raise DomainError("empty set has no bounds")
        return self.intervals[0][0], self.intervals[-1][1]

    def contains(self, x: object) -> bool:
        x = as_fraction(x)
        return any(a <= x <= b for a, b in self.intervals)

    def issubset(self, other: "CompactSet1D") -> bool:
        return all(any(c <= a and b <= d for c, d in other.intervals) for a, b in self.intervals)

    def union(self, other: "CompactSet1D") -> "CompactSet1D":
        return CompactSet1D(self.intervals + other.intervals)

    def grid(self, step: float) -> np.ndarray:
        """Sorted float nodes of F on the lattice step*Z, plus every isolated point."""
        nodes: list[np.ndarray] = []
        for a, b in self.intervals:
            if a == b:
                nodes.append(np.array([float(a)]))
                continue
            lo = math.ceil(a / as_fraction(step))
            hi = math.floor(b / as_fraction(step))
            nodes.append(np.arange(lo, hi + 1) * step)
        if not nodes:
            return np.empty(0)
        return np.unique(np.concatenate(nodes))


@dataclass(frozen=True)
class Decomposition:
    """Finite list of compact pieces whose union is the target set."""

    members: tuple[CompactSet1D, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise DomainError("decomposition must have at least one member")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def union(self) -> CompactSet1D:
        return CompactSet1D(tuple(p for m in self.members for p in m.intervals))


def random_compact_set(rng: np.random.Generator, max_components: int = 6,
                       denominator: int = 64, upper: int = 4) -> CompactSet1D:
    """Random union of intervals and points with endpoints in (1/denominator) * Z."""
    count = int(rng.integers(1, max_components + 1))
    pairs = []
    for _ in range(count):
        a = int(rng.integers(1, upper * denominator))
        width = 0 if rng.random() < 0.3 else int(rng.integers(1, denominator))
        pairs.append((Fraction(a, denominator), Fraction(a + width, denominator)))
    return CompactSet1D(tuple(pairs))


# ----------------------------------------------------------------------------
# Minkowski content and Kolmogorov entropy
# ----------------------------------------------------------------------------

def minkowski_content(F: CompactSet1D, n: int) -> int:
    """Number of half-open cells [i/n, (i+1)/n) that meet F."""
    if int(n) < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    count = 0
    covered = None
    for a, b in F.intervals:
        lo, hi = math.floor(a * n), math.floor(b * n)
        if covered is not None:
            lo = max(lo, covered + 1)
        if hi >= lo:
            count += hi - lo + 1
        covered = hi if covered is None else max(covered, hi)
    return count


def kolmogorov_entropy(F: CompactSet1D, eps: object,
                       witness: bool = True) -> tuple[int, list[Fraction]]:
    """Maximal size of an eps-separated subset of F, with a witness.

    Left-to-right greedy selection is optimal on the line: any separated set
    can be shifted point by point onto the greedy choices without losing
    separation.

    Args:
        F: Compact set
        eps: Separation (> 0)
        witness: Also return the selected points

    Returns:
        (K_F(eps), selected points; empty when ``witness`` is False)
    """
    eps = as_fraction(eps)
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    count = 0
    points: list[Fraction] = []
    last: Optional[Fraction] = None
    for a, b in F.intervals:
        start = a if last is None else max(a, last + eps)
        if start > b:
            continue
        here = math.floor((b - start) / eps) + 1
        count += here
        last = start + (here - 1) * eps
        if witness:
            points.extend(start + i * eps for i in range(here))
    return count, points


def check_entropy_content(F: CompactSet1D, n: int) -> bool:
    """K_F(1/n) <= M_n(F) <= 3 K_F(1/n), checked on exact integers."""
    k, _ = kolmogorov_entropy(F, Fraction(1, int(n)), witness=False)
    m = minkowski_content(F, n)
    return k <= m <= 3 * k


def check_entropy_doubling(F: CompactSet1D, eps: object) -> bool:
    """K_F(eps) <= 6 K_F(2 eps), checked on exact integers."""
    eps = as_fraction(eps)
    k1, _ = kolmogorov_entropy(F, eps, witness=False)
    k2, _ = kolmogorov_entropy(F, 2 * eps, witness=False)
    return k1 <= 6 * k2


# ----------------------------------------------------------------------------
# Dimensions
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DimensionEstimate:
    """Upper and lower growth-exponent estimates with the data they came from."""

    upper: float
    lower: float
    low_confidence: bool
    scales: tuple[float, ...] = ()
    counts: tuple[int, ...] = ()


def box_counts(points: np.ndarray, n_values: Sequence[int]) -> np.ndarray:
    """Occupied cells of width 1/n for a point cloud, for each n."""
    points = np.asarray(points, dtype=float)
    if not len(points):
        return np.zeros(len(n_values), dtype=int)
    return np.array([len(np.unique(np.floor(points * n))) for n in n_values])


def _window_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # least-squares slopes over consecutive 3-point windows
    slopes = []
    for i in range(len(x) - 2):
        slope, _ = np.polyfit(x[i:i + 3], y[i:i + 3], 1)
        slopes.append(slope)
    return np.array(slopes)


def growth_exponent(scales: Sequence[float], counts: Sequence[int],
                    finite: bool) -> DimensionEstimate:
    """Estimate limsup/liminf of log count / log scale from local log-log slopes.

    Slopes are taken over 3-scale windows within the finer half of the scales;
    the largest is the upper estimate and the smallest the lower one.
    """
    order = np.argsort(scales)
    scales = np.asarray(scales, dtype=float)[order]
    counts = np.asarray(counts)[order]
    if len(scales) < 3:
        raise DomainError(f"need at least 3 scales, got {len(scales)}")
    if np.any(counts <= 0):
        return DimensionEstimate(0.0, 0.0, True, tuple(scales), tuple(int(c) for c in counts))
    fine = max(3, (len(scales) + 1) // 2)
    x = np.log(scales[-fine:])
    y = np.log(counts[-fine:].astype(float))
    slopes = _window_slopes(x, y)
    degenerate = bool(np.all(counts == counts[0])) and not finite
    upper, lower = float(slopes.max()), float(slopes.min())
    if np.all(counts[-fine:] == counts[-1]):
        upper = lower = 0.0
    return DimensionEstimate(
        upper=upper,
        lower=lower,
        low_confidence=degenerate,
        scales=tuple(float(s) for s in scales),
        counts=tuple(int(c) for c in counts),
    )


def minkowski_dimension(F: CompactSet1D | np.ndarray, n_values: Sequence[int]) -> DimensionEstimate:
    """Upper/lower Minkowski dimension estimates from grid-cell counts.

    Args:
        F: Compact set (exact counts) or a sampled point cloud (box counts)
        n_values: At least three cell densities n (cells of width 1/n)

    Returns:
        DimensionEstimate with ``lower <= upper``
    """
    n_values = sorted(set(int(n) for n in n_values))
    if len(n_values) < 3:
        raise DomainError(f"need at least 3 distinct scales, got {n_values}")
    if isinstance(F, CompactSet1D):
        counts = [minkowski_content(F, n) for n in n_values]
        finite = F.is_finite
    else:
        counts = list(box_counts(np.asarray(F), n_values))
        finite = True
    if not any(counts):
        return DimensionEstimate(0.0, 0.0, True, tuple(map(float, n_values)), tuple(counts))
    return growth_exponent(n_values, counts, finite)


def entropy_dimension(F: CompactSet1D, eps_values: Sequence[float]) -> DimensionEstimate:
    """Growth exponent of K_F(eps) in 1/eps, the entropy form of the Minkowski dimension."""
    eps_values = sorted(set(float(e) for e in eps_values), reverse=True)
    if len(eps_values) < 3:
        raise DomainError(f"need at least 3 distinct eps values, got {eps_values}")
    counts = [kolmogorov_entropy(F, e, witness=False)[0] for e in eps_values]
    return growth_exponent([1.0 / e for e in eps_values], counts, F.is_finite)


def packing_dimension(D: Decomposition, n_values: Sequence[int]) -> float:
    """Largest upper Minkowski estimate over the members of a supplied decomposition."""
    return max(minkowski_dimension(member, n_values).upper for member in D.members)


# ----------------------------------------------------------------------------
# Measure functions and Hausdorff covers
# ----------------------------------------------------------------------------

def eval_phi_trace(x: float, d: int) -> float:
    """Phi(x) = [log_+(1/x)]^{-(8-d)/2}, the gauge of slice zero sets, for d in {2, 3}."""
    if d not in (2, 3):
        raise DomainError(f"phi_trace is defined for d in {{2, 3}}, got {d}")
    if not x > 0:
        raise DomainError(f"x must be positive, got {x}")
    return float(log_plus(1.0 / x) ** (-(8 - d) / 2))


@dataclass(frozen=True)
class MeasureFunction:
    """Gauge phi for Hausdorff measures, with its recorded doubling constant."""

    tag: str
    params: tuple[float, ...]
    doubling_constant: float
    doubling_threshold: float
    func: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __call__(self, x: float) -> float:
        if self.tag == "power":
            return float(x) ** self.params[0]
        if self.tag == "phi_trace":
            return eval_phi_trace(x, int(self.params[0]))
        return float(self.func(x))

    @classmethod
    def power(cls, alpha: float) -> "MeasureFunction":
        if not alpha > 0:
            raise DomainError(f"alpha must be positive, got {alpha}")
        return cls("power", (float(alpha),), 2.0 ** alpha, math.inf)

    @classmethod
    def phi_trace(cls, d: int) -> "MeasureFunction":
        if d not in (2, 3):
            raise DomainError(f"phi_trace is defined for d in {{2, 3}}, got {d}")
        # Phi(2x)/Phi(x) is largest where log(1/(2x)) reaches the floor
        return cls("phi_trace", (float(d),), (1 + math.log(2)) ** ((8 - d) / 2), math.exp(-1) / 2)

    @classmethod
    def custom(cls, func: Callable[[float], float], doubling_constant: float,
               doubling_threshold: float) -> "MeasureFunction":
        xs = np.geomspace(doubling_threshold * 1e-6, doubling_threshold, 200)
        values = np.array([func(x) for x in xs])
        if np.any(np.diff(values) < 0):
            raise DomainError("measure function must be non-decreasing near zero")
        doubled = np.array([func(2 * x) for x in xs[:-1]])
        if np.any(doubled > doubling_constant * values[:-1] * (1 + 1e-12)):
            raise DomainError(f"measure function is not doubling with C = {doubling_constant}")
        return cls("custom", (), float(doubling_constant), float(doubling_threshold), func)


def hausdorff_measure_upper(F: CompactSet1D | np.ndarray, phi: MeasureFunction, r: float) -> float:
    """Upper bound on H_phi^(r)(F) from a greedy cover by l1 balls of radius r.

    Each ball is placed with its left edge at the first uncovered point, so it
    covers [p, p + 2r]. This is an upper bound only; it is not monotone in r.
    """
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    balls = 0
    if isinstance(F, CompactSet1D):
        diameter = 2 * as_fraction(r)
        covered: Optional[Fraction] = None
        for a, b in F.intervals:
            if covered is not None and b <= covered:
                continue
            start = a if covered is None or a > covered else covered
            here = max(1, math.ceil((b - start) / diameter))
            balls += here
            covered = start + here * diameter
    else:
        points = np.sort(np.asarray(F, dtype=float))
        covered_to = -math.inf
        for p in points:
            if p > covered_to:
                balls += 1
                covered_to = p + 2 * r
    return balls * phi(r)


# ----------------------------------------------------------------------------
# Escape integral
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PsiFunction:
    """Non-decreasing gauge psi with psi(t) -> inf; ``scale`` multiplies its values."""

    tag: str
    alpha: Optional[float] = None
    table_x: tuple[float, ...] = ()
    table_y: tuple[float, ...] = ()
    scale: float = 1.0

    @classmethod
    def psi_alpha(cls, alpha: float) -> "PsiFunction":
        """psi_alpha(x) = [log_+ x]^{2/alpha}."""
        if not alpha > 0:
            raise DomainError(f"alpha must be positive, got {alpha}")
        return cls("psi_alpha", alpha=float(alpha))

    @classmethod
    def table(cls, xs: Sequence[float], ys: Sequence[float]) -> "PsiFunction":
        """Monotone gauge interpolated log-log from a table and extrapolated along its last slope."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if len(xs) < 2 or len(xs) != len(ys) or np.any(np.diff(xs) <= 0) or xs[0] <= 0:
            raise DomainError("psi table needs >= 2 points with increasing positive x")
        if np.any(ys <= 0) or np.any(np.diff(ys) < 0):
            raise DomainError("psi must be positive and non-decreasing")
        if not ys[-1] > ys[-2]:
            raise DomainError("psi must grow without bound (constant tail given)")
        return cls("table", table_x=tuple(xs), table_y=tuple(ys))

    def scaled(self, r: float) -> "PsiFunction":
        if not r > 0:
            raise DomainError(f"scale must be positive, got {r}")
        return PsiFunction(self.tag, self.alpha, self.table_x, self.table_y, self.scale * r)

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.tag == "psi_alpha":
            return self.scale * log_plus(x) ** (2.0 / self.alpha)
        lx, ly = np.log(self.table_x), np.log(self.table_y)
        slope = (ly[-1] - ly[-2]) / (lx[-1] - lx[-2])
        logx = np.log(x)
        inner = np.interp(logx, lx, ly)
        outer = ly[-1] + slope * (logx - lx[-1])
        return self.scale * np.exp(np.where(logx > lx[-1], outer, inner))


@dataclass(frozen=True)
class UpsilonResult:
    value: float
    classification: str
    tail_exponent: Optional[float]


def upsilon(F: CompactSet1D, psi: PsiFunction, d: int, x_max: float = 1e12,
            nodes: int = 10_000) -> UpsilonResult:
    """Escape integral Upsilon_F(psi) = int_1^inf [K_F(1/psi)/psi^{(d-2)/2} ^ 1] dx/x.

    The value is a trapezoid rule in u = log x up to ``x_max``; the
    classification comes from the tail exponent p of the integrand in log x
    (finite iff p > 1), known for psi_alpha gauges only.
    """
    if d < 3:
        raise DomainError(f"d must be >= 3, got {d}")
    u = np.linspace(0.0, math.log(x_max), nodes)
    gauge = psi(np.exp(u))
    counts = np.array([
        kolmogorov_entropy(F, 1.0 / g, witness=False)[0] if g > 0 else 0 for g in gauge
    ], dtype=float)
    integrand = np.minimum(counts / gauge ** ((d - 2) / 2), 1.0)
    value = float(trapezoid(integrand, u))

    if F.is_empty:
        return UpsilonResult(value, "finite", math.inf)
    if psi.tag != "psi_alpha":
        logger.debug("no tail model for a tabulated gauge; classification inconclusive")
        return UpsilonResult(value, "inconclusive", None)
    exponent = (d - 4) / psi.alpha if not F.is_finite else (d - 2) / psi.alpha
    return UpsilonResult(value, "finite" if exponent > 1 else "infinite", exponent)


def critical_alpha(F: CompactSet1D, d: int) -> float:
    """Rate d - 2 - 2 dim at which the psi_alpha classification of F flips."""
    if F.is_empty:
        raise DomainError("critical rate of the empty set is undefined")
    dim = 0 if F.is_finite else 1
    return float(d - 2 - 2 * dim)


def fin_loc_classify(D: Decomposition, psi: PsiFunction, d: int) -> bool:
    """Whether every member of the supplied decomposition has a finite escape integral."""
    verdicts = []
    for member in D.members:
        result = upsilon(F=member, psi=psi, d=d, nodes=200)
        if result.classification == "inconclusive":
            raise InconclusiveError(
                f"member {member} has no tail model for gauge '{psi.tag}'; supply psi_alpha"
            )
        verdicts.append(result.classification == "finite")
    return all(verdicts)
