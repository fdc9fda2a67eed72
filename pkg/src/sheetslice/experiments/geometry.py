"""Zero-set, good-cell and double-point scans of Brownian-sheet slices on [1, 2]^2."""
import logging
import math

import numpy as np
from scipy.spatial.distance import cdist

from ..core.randfield import iter_sheet_blocks, sample_sheet_region
from ..core.setkit import eval_phi_trace, minkowski_dimension
from ..core.stats import fit_loglog_slope
from ..errors import DomainError
from .config import ExperimentConfig, parse_grid
from .harness import RunContext, register, trial_rng
from .report import INCONCLUSIVE, ExperimentReport, Tally

logger = logging.getLogger(__name__)

ZERO_THRESHOLD_POLICY = "eps_zero(k) = n * sqrt(log k / k), n = threshold_n (default 2)"
SCAN_CHUNK = 64


def zero_threshold(k: int, n: float = 2.0) -> float:
    """Modulus scale n * (log k / k)^{1/2} of a k x k grid on [1, 2]^2."""
    return n * math.sqrt(math.log(k) / k)


def unit_nodes(k: int, start: float = 1.0) -> np.ndarray:
    return start + np.arange(k + 1) / k


def box_scales(k: int) -> list[int]:
    """Dyadic cell counts 4, 8, ..., k/4 for box counting k + 1 columns."""
    top = int(round(math.log2(k)))
    return [2 ** j for j in range(2, top - 1)]


def marked_dimension(points: np.ndarray, k: int) -> tuple[float, bool]:
    """Box-counting dimension of marked columns in [0, 1] and a low-confidence flag.

    The estimate is the least-squares slope of log counts over all dyadic
    scales; an empty or constant count sequence gives 0 with the flag set.
    """
    scales = box_scales(k)
    if len(points) == 0:
        return 0.0, True
    estimate = minkowski_dimension(points, scales)
    fit = fit_loglog_slope(estimate.scales, estimate.counts)
    slope = fit.slope if math.isfinite(fit.slope) else 0.0
    return max(slope, 0.0), estimate.low_confidence or estimate.upper == 0


def _check_dyadic(values: list[int], least: int) -> None:
    for k in values:
        if k < least or k & (k - 1):
            raise DomainError(f"k must be a power of two >= {least}, got {k}")


def _dimension_check(report: ExperimentReport, k: float, target: float, tol: float) -> None:
    tally = report.tally("dimension", k)
    mean = tally.estimate()[0]
    report.fits["dimension"] = {"k": k, "estimate": mean, "target": target, "tolerance": tol,
                                "stderr": tally.stderr()}
    if report.tally("empty", k).successes == report.tally("empty", k).n:
        report.note("every marked set was empty; dimension reported 0 with low confidence")
        report.check("dimension", INCONCLUSIVE)
        return
    report.check("dimension", abs(mean - target) <= tol)


# ----------------------------------------------------------------------------
# Zero-set projection
# ----------------------------------------------------------------------------

def _zero_ks(cfg: ExperimentConfig) -> list[int]:
    return cfg.k_ladder or [parse_grid(cfg.grid)[0]]


def _validate_zeros(cfg: ExperimentConfig) -> None:
    if cfg.dim not in (2, 3, 4):
        raise DomainError(f"zero_projection_scan takes d in {{2, 3}} (4 as the vanishing analog), "
                          f"got {cfg.dim}")
    _check_dyadic(_zero_ks(cfg), 64)


def _summarize_zeros(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    ks = _zero_ks(cfg)
    d = cfg.dim
    report.extras["thresholds"] = {k: zero_threshold(k, cfg.threshold_n) for k in ks}
    if d == 4:
        fractions = [report.tally("fraction", k).estimate()[0] for k in ks]
        report.fits["fraction"] = {"k": ks, "mean": fractions}
        if len(ks) < 2:
            report.check("vanishing", INCONCLUSIVE)
        else:
            report.check("vanishing", fractions[-1] < fractions[0])
        return
    target = min(1.0, 2 - d / 2)
    _dimension_check(report, ks[-1], target, cfg.tolerance or (0.1 if d == 2 else 0.15))


@register(
    "zero_projection_scan",
    summarize=_summarize_zeros,
    validate=_validate_zeros,
    defaults={"dim": 2, "grid": "1024x1024", "trials": 8},
    policies={"zero_threshold": ZERO_THRESHOLD_POLICY,
              "dimension": "least-squares box-counting slope over dyadic scales 4..k/4"},
)
def zero_projection_scan(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Mark columns s whose slice enters the eps_zero(k) ball for some t in [1, 2]."""
    tallies = []
    for k in _zero_ks(cfg):
        nodes = unit_nodes(k)
        eps = zero_threshold(k, cfg.threshold_n)

        def one(trial: int) -> tuple[float, float, bool]:
            rng = trial_rng(cfg, trial, k)
            col_min = np.full(k + 1, np.inf)
            for _, rows in iter_sheet_blocks(nodes, nodes, cfg.dim, rng):
                np.minimum(col_min, np.abs(rows).sum(axis=-1).min(axis=0), out=col_min)
            marked = nodes[col_min <= eps] - 1.0
            dimension, _ = marked_dimension(marked, k)
            return dimension, len(marked) / (k + 1), len(marked) == 0

        results = context.map_trials(one, range(*cfg.trial_range), desc=f"zeros k={k}")
        trials = range(*cfg.trial_range)
        tallies.append(Tally.mean("dimension", k, {i: r[0] for i, r in zip(trials, results)}))
        tallies.append(Tally.mean("fraction", k, {i: r[1] for i, r in zip(trials, results)}))
        tallies.append(Tally.proportion("empty", k, sum(r[2] for r in results), cfg.trials))
    return tallies


# ----------------------------------------------------------------------------
# Good-cell counts
# ----------------------------------------------------------------------------

def count_normalizer(k: int, d: int) -> float:
    """(log k)^{(8-d)/2} for d in {2, 3}; k^{1/2} (log k)^{3/2} for d = 1."""
    if d == 1:
        return math.sqrt(k) * math.log(k) ** 1.5
    return math.log(k) ** ((8 - d) / 2)


def _validate_cells(cfg: ExperimentConfig) -> None:
    if cfg.dim not in (1, 2, 3):
        raise DomainError(f"good_cell_counts takes d in {{1, 2, 3}}, got {cfg.dim}")
    if not cfg.k_ladder:
        raise DomainError("good_cell_counts needs a k_ladder")
    _check_dyadic(cfg.k_ladder, 4)


def _summarize_cells(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    ks = cfg.k_ladder
    ratios = [report.tally("normalized", k).estimate()[0] for k in ks]
    growth = [b / a if a > 0 else math.inf for a, b in zip(ratios, ratios[1:])]
    report.fits["normalized"] = {"k": ks, "mean": ratios, "step_growth": growth}
    report.extras["modulus_frequency"] = {k: report.tally("modulus", k).estimate()[0] for k in ks}
    if len(ks) < 2:
        report.check("no_doubling", INCONCLUSIVE)
        return
    report.check("no_doubling", all(g < 2 for g in growth) and ratios[-1] < 2 * ratios[0])


@register(
    "good_cell_counts",
    summarize=_summarize_cells,
    validate=_validate_cells,
    defaults={"dim": 3, "k_ladder": [256, 512, 1024, 2048], "trials": 4},
    policies={"good_cell": "a corner value within n * sqrt(log k / k) of the origin",
              "modulus": "corner l1 spread of every cell within n * sqrt(log k / k)"},
)
def good_cell_counts(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """max_i N_{i,k}: the most good cells in one column of the k x k tiling of [1, 2]^2."""
    tallies = []
    d, n = cfg.dim, cfg.threshold_n
    for k in cfg.k_ladder:
        nodes = unit_nodes(k)
        bound = zero_threshold(k, n)

        def one(trial: int) -> tuple[int, bool]:
            rng = trial_rng(cfg, trial, k)
            per_column = np.zeros(k, dtype=np.int64)
            modulus = True
            previous = None
            for _, rows in iter_sheet_blocks(nodes, nodes, d, rng):
                if previous is not None:
                    rows = np.concatenate([previous[None], rows])
                previous = rows[-1]
                if len(rows) < 2:
                    continue
                good = np.abs(rows).sum(axis=-1) <= bound
                cell = good[:-1, :-1] | good[:-1, 1:] | good[1:, :-1] | good[1:, 1:]
                per_column += cell.sum(axis=0)
                corners = np.stack([rows[:-1, :-1], rows[:-1, 1:], rows[1:, :-1], rows[1:, 1:]])
                spread = (corners.max(axis=0) - corners.min(axis=0)).sum(axis=-1)
                modulus &= bool(np.all(spread <= bound))
            return int(per_column.max()), modulus

        results = context.map_trials(one, range(*cfg.trial_range), desc=f"cells k={k}")
        trials = range(*cfg.trial_range)
        norm = count_normalizer(k, d)
        tallies.append(Tally.mean("max_count", k, {i: r[0] for i, r in zip(trials, results)}))
        tallies.append(Tally.mean("normalized", k,
                                  {i: r[0] / norm for i, r in zip(trials, results)}))
        if d in (2, 3):
            phi = eval_phi_trace(1.0 / k, d)
            tallies.append(Tally.mean("phi_cover", k,
                                      {i: phi * r[0] for i, r in zip(trials, results)}))
        tallies.append(Tally.proportion("modulus", k, sum(r[1] for r in results), cfg.trials))
    return tallies


# ----------------------------------------------------------------------------
# Double points
# ----------------------------------------------------------------------------

# (t1, s, t2, u) as fractions of the unit ranges; node pairs for the cross-covariance check
_CROSS_PAIRS = ((0.0, 0.25, 0.0, 0.25), (0.5, 0.5, 0.5, 0.5), (1.0, 0.75, 1.0, 0.75),
                (1.0, 1.0, 0.0, 0.5), (0.25, 0.5, 1.0, 1.0))


def double_threshold(cfg: ExperimentConfig) -> float:
    if cfg.eps is not None:
        return cfg.eps
    m = parse_grid(cfg.grid)[1]
    return cfg.threshold_n * math.sqrt(2 * math.log(m) / m)


def _validate_double(cfg: ExperimentConfig) -> None:
    if cfg.dim not in (2, 3, 4, 5):
        raise DomainError(f"double_point_scan takes d in {{2, 3, 4, 5}}, got {cfg.dim}")
    k, m = parse_grid(cfg.grid)
    _check_dyadic([k], 64)
    if k > 512 or m > 512:
        raise DomainError(f"double-point grids are limited to 512x512, got {cfg.grid}")


def _summarize_double(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    k = parse_grid(cfg.grid)[0]
    d = cfg.dim
    target = min(1.0, 3 - d / 2)
    report.extras["threshold"] = double_threshold(cfg)
    _dimension_check(report, k, target, cfg.tolerance or (0.2 if d == 5 else 0.15))
    worst = 0.0
    for t in report.series("cross_cov"):
        se = t.stderr()
        score = abs(t.estimate()[0]) / se if se > 0 else math.inf
        worst = max(worst, score)
    report.fits["independence"] = {"max_standard_errors": worst}
    report.check("independence", worst < 5)


@register(
    "double_point_scan",
    summarize=_summarize_double,
    validate=_validate_double,
    defaults={"dim": 4, "grid": "256x256", "trials": 4},
    policies={"construction": "B1(s,t) = B(s, 5/2 - t) - B(s, 5/2), B2(s,t) = B(s, 5/2 + t) "
                              "- B(s, 5/2) from one sheet",
              "threshold": "eps = n * sqrt(2 log m / m) unless eps is given",
              "search": "full (t1, t2) grid per column with early exit"},
)
def double_point_scan(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Mark columns s where |B2(s, t2) - B1(s, t1)| <= eps for some (t1, t2) in [1, 2]^2."""
    k, m = parse_grid(cfg.grid)
    s_nodes = unit_nodes(k)
    lower = unit_nodes(m, 0.5)
    t_nodes = np.concatenate([lower, [2.5], unit_nodes(m, 3.5)])
    eps = double_threshold(cfg)

    def one(trial: int) -> tuple[float, float, bool, list[float]]:
        rng = trial_rng(cfg, trial)
        region = sample_sheet_region(s_nodes, t_nodes, cfg.dim, rng)
        center = region[m + 1]
        first = region[m::-1] - center
        second = region[m + 2:] - center
        marked = np.zeros(k + 1, dtype=bool)
        for j in range(k + 1):
            target = second[:, j]
            for lo in range(0, m + 1, SCAN_CHUNK):
                if cdist(first[lo:lo + SCAN_CHUNK, j], target, "cityblock").min() <= eps:
                    marked[j] = True
                    break
        cross = [float(first[round(a * m), round(i * k), 0] * second[round(b * m), round(j * k), 0])
                 for a, i, b, j in _CROSS_PAIRS]
        points = s_nodes[marked] - 1.0
        dimension, _ = marked_dimension(points, k)
        return dimension, marked.mean(), not marked.any(), cross

    results = context.map_trials(one, range(*cfg.trial_range), desc="double points")
    trials = list(range(*cfg.trial_range))
    tallies = [
        Tally.mean("dimension", k, {i: r[0] for i, r in zip(trials, results)}),
        Tally.mean("fraction", k, {i: r[1] for i, r in zip(trials, results)}),
        Tally.proportion("empty", k, sum(r[2] for r in results), cfg.trials),
    ]
    for p in range(len(_CROSS_PAIRS)):
        tallies.append(Tally.mean("cross_cov", p, {i: r[3][p] for i, r in zip(trials, results)}))
    return tallies
