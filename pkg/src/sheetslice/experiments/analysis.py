"""Closed-form oracles, deterministic checks and the capacity/dimension/simulate runs."""
import logging
import math
from fractions import Fraction

import numpy as np

from ..core import capkit
from ..core import kernels as epsk
from ..core.randfield import build_sheet, modulus_holds, sample_white_noise, slice_at
from ..core.setkit import (
    CompactSet1D,
    Decomposition,
    MeasureFunction,
    PsiFunction,
    check_entropy_content,
    check_entropy_doubling,
    critical_alpha,
    entropy_dimension,
    fin_loc_classify,
    hausdorff_measure_upper,
    minkowski_dimension,
    packing_dimension,
    random_compact_set,
    upsilon,
)
from ..errors import DomainError
from ..utils.config import get_config
from ..utils.rng import derive_rng, stream_id
from .config import ExperimentConfig, parse_grid
from .harness import RunContext, register, trial_rng, trial_seed
from .report import INCONCLUSIVE, ExperimentReport, Tally

logger = logging.getLogger(__name__)

SANDWICH_DIMS = (3, 4, 5)
FIT_EPS = (2.0 ** -1, 2.0 ** -3, 2.0 ** -5)
VALIDATION_EPS = (2.0 ** -2, 2.0 ** -4, 2.0 ** -6)
SANDWICH_SLACK = 1.05
BALL_SIGMAS = (0.5, 1.0, 2.0)
BALL_RATIOS = (0.5, 1.0, 2.0)
FIT_SIGMA = 1.0


def _capacity_options() -> dict:
    config = get_config()
    return {"gap_tol": config.get("capacity.gap_tol", 1e-9),
            "max_iter": config.get("capacity.max_iter", 100_000)}


def _flag(value: bool) -> float:
    return 1.0 if value else 0.0


def _checks_from_flags(report: ExperimentReport, series: str, name: str) -> None:
    flags = report.series(series)
    if flags:
        report.check(name, all(t.value == 1.0 for t in flags))


# ----------------------------------------------------------------------------
# Covariance law of the simulated sheet
# ----------------------------------------------------------------------------

def _covariance_pairs(cfg: ExperimentConfig) -> list[tuple[int, int, int, int, int, int]]:
    ns, nt = parse_grid(cfg.grid)
    rng = derive_rng(cfg.seed, stream_id("covariance_pairs"))
    pairs = []
    for p in range(cfg.pairs):
        i1, i2 = rng.integers(1, ns + 1, size=2)
        j1, j2 = rng.integers(1, nt + 1, size=2)
        a = int(rng.integers(cfg.dim))
        b = a if p % 2 == 0 else int(rng.integers(cfg.dim))
        pairs.append((int(i1), int(j1), a, int(i2), int(j2), b))
    return pairs


def _summarize_covariance(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    worst = 0.0
    for t in report.series("product"):
        expected = report.value("expected", t.param)
        se = t.stderr()
        score = abs(t.estimate()[0] - expected) / se if se > 0 else math.inf
        worst = max(worst, score)
    report.fits["covariance"] = {"max_standard_errors": worst}
    report.check("covariance", worst <= 5)


@register(
    "covariance_law",
    summarize=_summarize_covariance,
    defaults={"dim": 2, "grid": "32x32", "trials": 10000, "pairs": 20},
    policies={"covariance": "Cov(B_a(s,t), B_b(u,v)) = min(s,u) min(t,v) delta_ab"},
)
def covariance_law(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Empirical covariances of simulated sheets at random node pairs."""
    spec = cfg.grid_spec()
    pairs = _covariance_pairs(cfg)

    def one(trial: int) -> list[float]:
        sheet = build_sheet(sample_white_noise(spec.with_seed(trial_seed(cfg, trial))))
        v = sheet.values
        return [float(v[i1, j1, a] * v[i2, j2, b]) for i1, j1, a, i2, j2, b in pairs]

    results = context.map_trials(one, range(*cfg.trial_range), desc="sheets")
    trials = range(*cfg.trial_range)
    tallies = []
    for p, (i1, j1, a, i2, j2, b) in enumerate(pairs):
        expected = min(i1, i2) * spec.ds * min(j1, j2) * spec.dt * (a == b)
        tallies.append(Tally.fixed("expected", p, expected))
        tallies.append(Tally.mean("product", p, {i: r[p] for i, r in zip(trials, results)}))
    return tallies


# ----------------------------------------------------------------------------
# Entropy and content inequalities
# ----------------------------------------------------------------------------

def _summarize_entropy(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    for series in ("content", "doubling"):
        t = report.tally(series, 0)
        report.fits[series] = {"holds": t.successes, "checked": t.n}
        report.check(series, t.successes == t.n)


@register(
    "entropy_checks",
    summarize=_summarize_entropy,
    defaults={"trials": 1000, "scales": 10},
    policies={"arithmetic": "exact rationals"},
)
def entropy_checks(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """K_F(1/n) <= M_n(F) <= 3 K_F(1/n) and K_F(eps) <= 6 K_F(2 eps) on random sets."""

    def one(trial: int) -> tuple[int, int]:
        rng = trial_rng(cfg, trial)
        F = random_compact_set(rng)
        ns = sorted(int(n) for n in rng.choice(np.arange(1, 257), size=cfg.scales, replace=False))
        content = sum(check_entropy_content(F, n) for n in ns)
        doubling = sum(check_entropy_doubling(F, Fraction(1, n)) for n in ns)
        return content, doubling

    results = context.map_trials(one, range(*cfg.trial_range), desc="sets")
    checked = cfg.trials * cfg.scales
    return [Tally.proportion("content", 0, sum(r[0] for r in results), checked),
            Tally.proportion("doubling", 0, sum(r[1] for r in results), checked)]


# ----------------------------------------------------------------------------
# Kernel sandwiches
# ----------------------------------------------------------------------------

def sandwich_grid() -> np.ndarray:
    """x values on (0, 2], including every eps^2 of the fit and validation ladders."""
    knees = [e ** 2 for e in FIT_EPS + VALIDATION_EPS]
    return np.union1d(np.geomspace(1e-5, 2.0, 48), knees)


def sandwich_ratios(func, d: int, order: float, eps: float, x: np.ndarray) -> tuple[float, float]:
    """(max value / bound over x, max bound / value over x >= eps^2) for bound eps^d U_order."""
    p = epsk.EpsKernelParams(eps, d)
    values = np.asarray(func(p, x), dtype=float)
    bounds = eps ** d * np.asarray(capkit.riesz_eval(order, x), dtype=float)
    upper = epsk.fit_upper_constant(values, bounds)
    far = x >= eps ** 2
    lower = epsk.fit_lower_constant(values[far], bounds[far])
    return upper, lower


def _kernel_identities(d: int, x: np.ndarray) -> list[Tally]:
    tallies = []
    for label, func, order in (("F", epsk.F_eps, (d - 2) / 2), ("G", epsk.G_eps, (d - 4) / 2)):
        fitted = [sandwich_ratios(func, d, order, e, x) for e in FIT_EPS]
        c_up = max(u for u, _ in fitted)
        c_lo = max(lo for _, lo in fitted)
        validated = [sandwich_ratios(func, d, order, e, x) for e in VALIDATION_EPS]
        tallies += [
            Tally.fixed(f"c_{label}_upper", d, c_up),
            Tally.fixed(f"c_{label}_lower", d, c_lo),
            Tally.fixed(f"{label}_upper_ok", d,
                        _flag(all(u <= c_up * SANDWICH_SLACK for u, _ in validated))),
            Tally.fixed(f"{label}_lower_ok", d,
                        _flag(all(lo <= c_lo * SANDWICH_SLACK for _, lo in validated))),
        ]
    params = [epsk.EpsKernelParams(e, d) for e in FIT_EPS + VALIDATION_EPS]
    holds = all(epsk.G_eps(p, xv) >= epsk.half_wide_F(p, xv) * (1 - 1e-12)
                for p in params for xv in (0.01, 0.1, 1.0))
    tallies.append(Tally.fixed("half_wide_ok", d, _flag(holds)))
    return tallies


def _ball_probability(cfg: ExperimentConfig, d: int) -> list[Tally]:
    rows = {}
    for k, sigma in enumerate(BALL_SIGMAS):
        for j, ratio in enumerate(BALL_RATIOS):
            eps = sigma * ratio
            ball = epsk.gaussian_ball_prob(sigma, eps, d, cfg.trials,
                                           seed=trial_seed(cfg, 0, d, k, j))
            rows[sigma, ratio] = (ball, epsk.f_eps(epsk.EpsKernelParams(eps, d), sigma ** 2))
    upper_ok = all(b.estimate <= f + 5 * b.stderr for b, f in rows.values())
    fit = [(b.estimate, f) for (s, _), (b, f) in rows.items() if s == FIT_SIGMA]
    c_lo = epsk.fit_lower_constant(np.array([b for b, _ in fit]), np.array([f for _, f in fit]))
    lower_ok = all(b.estimate + 5 * b.stderr >= f / c_lo
                   for (s, _), (b, f) in rows.items() if s != FIT_SIGMA)
    return [Tally.fixed("c_ball_lower", d, c_lo), Tally.fixed("ball_upper_ok", d, _flag(upper_ok)),
            Tally.fixed("ball_lower_ok", d, _flag(lower_ok))]


def _summarize_kernels(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    report.fits["closed_form"] = {"max_relative_error": report.value("F_quad_error")}
    report.check("closed_form", report.value("F_quad_error") <= 1e-9)
    report.check("double_integral", report.value("G_double_error") <= 1e-8)
    report.check("ball_exact", report.value("ball_exact_ok") == 1.0)
    for d in SANDWICH_DIMS:
        report.fits[f"constants_d{d}"] = {
            name: report.value(name, d)
            for name in ("c_F_upper", "c_F_lower", "c_G_upper", "c_G_lower", "c_ball_lower")
        }
    for flag in ("F_upper_ok", "F_lower_ok", "G_upper_ok", "G_lower_ok", "half_wide_ok",
                 "ball_upper_ok", "ball_lower_ok"):
        _checks_from_flags(report, flag, flag.removesuffix("_ok"))


def _validate_kernels(cfg: ExperimentConfig) -> None:
    if cfg.trials < epsk.MIN_BALL_TRIALS:
        raise DomainError(f"kernel_sandwich needs trials >= {epsk.MIN_BALL_TRIALS}")


@register(
    "kernel_sandwich",
    summarize=_summarize_kernels,
    validate=_validate_kernels,
    defaults={"trials": 200000},
    policies={"constants": "max observed ratio on the fit grid, validated on a disjoint eps grid "
                           f"with slack {SANDWICH_SLACK}",
              "norm": "l1"},
    monte_carlo=False,
)
def kernel_sandwich(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Closed forms, quadratures and the sandwich bounds of f_eps, F_eps, G_eps."""
    rng = trial_rng(cfg, 0)
    worst = 0.0
    for _ in range(100):
        p = epsk.EpsKernelParams(float(rng.uniform(0.05, 1.0)), int(rng.integers(1, 7)))
        x = float(np.exp(rng.uniform(np.log(1e-4), np.log(3.0))))
        exact, quad = epsk.F_eps(p, x), epsk.F_eps_quad(p, x)
        worst = max(worst, abs(exact - quad) / max(abs(exact), 1e-300))
    double = 0.0
    for d in SANDWICH_DIMS:
        for e, xv in ((0.5, 0.01), (0.25, 0.1), (0.1, 0.5)):
            p = epsk.EpsKernelParams(e, d)
            g = epsk.G_eps(p, xv)
            double = max(double, abs(g - epsk.G_eps_double(p, xv)) / g)
    exact = epsk.gaussian_ball_prob_exact(1.0, 1.0)
    ball = epsk.gaussian_ball_prob(1.0, 1.0, 1, cfg.trials, seed=trial_seed(cfg, 0, 1))
    tallies = [
        Tally.fixed("F_quad_error", 0, worst),
        Tally.fixed("G_double_error", 0, double),
        Tally.fixed("ball_exact_ok", 0, _flag(abs(ball.estimate - exact) <= 5 * ball.stderr)),
    ]
    x = sandwich_grid()
    for d in SANDWICH_DIMS:
        tallies += _kernel_identities(d, x)
        tallies += _ball_probability(cfg, d)
    return tallies


# ----------------------------------------------------------------------------
# Energy oracle, Taylor trend and projection
# ----------------------------------------------------------------------------

UNIT_INTERVAL = "0,1"


def riesz_half_energy() -> float:
    """Energy of Lebesgue measure on [0, 1] under |x|^{-1/2}: 8/3."""
    return 8.0 / 3.0


def _summarize_energy(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    exact = riesz_half_energy()
    errors = {t.param: abs(t.value - exact) / exact for t in report.series("energy")}
    report.fits["energy"] = {"exact": exact, "relative_error": errors}
    top = max(errors)
    report.check("energy", errors[top] <= (cfg.tolerance or 0.01))


@register(
    "energy_oracle",
    summarize=_summarize_energy,
    defaults={"set": UNIT_INTERVAL, "beta": 0.5, "atom_ladder": [256, 1024, 4096]},
    policies={"diagonal": capkit.DIAGONAL_POLICY},
    monte_carlo=False,
)
def energy_oracle(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Riesz energy of the uniform measure on midpoint atoms, per atom count."""
    kernel = capkit.Kernel.riesz(cfg.beta if cfg.beta is not None else 0.5)
    tallies = []
    for m in cfg.atom_ladder or [cfg.atoms]:
        mu = capkit.DiscreteMeasure.uniform(capkit.place_atoms(cfg.F, m))
        tallies.append(Tally.fixed("energy", m, capkit.energy(mu, kernel)))
    return tallies


def _summarize_taylor(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    caps = [t.value for t in report.series("capacity")]
    decreasing = all(b < a for a, b in zip(caps, caps[1:]))
    report.fits["capacity"] = {"atoms": [t.param for t in report.series("capacity")],
                               "capacity": caps}
    report.fits["solver"] = _capacity_options()
    if not all(t.value == 1.0 for t in report.series("converged")):
        report.note("some minimizations stopped before the duality-gap tolerance")
        report.check("trend", INCONCLUSIVE)
        return
    report.check("trend", decreasing and caps[-1] < (cfg.target or 0.25))


@register(
    "taylor_trend",
    summarize=_summarize_taylor,
    defaults={"set": UNIT_INTERVAL, "beta": 1.0, "atom_ladder": [2 ** j for j in range(5, 13)]},
    policies={"diagonal": capkit.DIAGONAL_POLICY, "solver": "away-step Frank-Wolfe"},
    monte_carlo=False,
)
def taylor_trend(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Cap_{U_1}([0, 1]) on growing atom counts; it must drift to zero."""
    kernel = capkit.Kernel.riesz(cfg.beta if cfg.beta is not None else 1.0)
    tallies = []
    for m in cfg.atom_ladder:
        result = capkit.capacity(cfg.F, kernel, m, **_capacity_options())
        tallies.append(Tally.fixed("capacity", m, result.capacity))
        tallies.append(Tally.fixed("converged", m, _flag(result.converged)))
    return tallies


def _summarize_projection(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    gaps = [t.value for t in report.series("gap")]
    report.fits["projection"] = {"sets": list(cfg.members), "relative_gap": gaps}
    report.check("projection", all(g < (cfg.tolerance or 0.1) for g in gaps))


@register(
    "projection",
    summarize=_summarize_projection,
    defaults={"members": ["1,2", "1,1.25;1.75,2"], "beta": 1.5, "m": 1, "atoms": 64},
    policies={"projection": "torus average over the extra coordinates"},
    monte_carlo=False,
)
def projection(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Cap_f(T^m x F) against Cap_{Pi_m f}(F) for each set in ``members``."""
    kernel = capkit.Kernel.riesz(cfg.beta if cfg.beta is not None else 1.5)
    tallies = []
    for k, text in enumerate(cfg.members):
        check = capkit.projection_theorem_check(CompactSet1D.from_text(text), kernel, cfg.m,
                                                cfg.atoms, _capacity_options()["gap_tol"])
        tallies += [Tally.fixed("gap", k, check.relative_gap),
                    Tally.fixed("product", k, check.product_capacity),
                    Tally.fixed("projected", k, check.projected_capacity)]
    return tallies


# ----------------------------------------------------------------------------
# Escape-integral thresholds
# ----------------------------------------------------------------------------

def _summarize_upsilon(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    _checks_from_flags(report, "threshold_ok", "thresholds")
    _checks_from_flags(report, "fin_loc_ok", "fin_loc")
    report.fits["critical"] = {f"{t.param:g}": t.value for t in report.series("critical")}


@register(
    "upsilon_thresholds",
    summarize=_summarize_upsilon,
    defaults={"members": ["1,2", "1"], "k_ladder": [5, 6, 7], "nodes": 2000},
    policies={"tail_model": "interval: (d-4)/alpha, finite set: (d-2)/alpha; finite iff > 1"},
    monte_carlo=False,
)
def upsilon_thresholds(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Classification of Upsilon_F(psi_alpha) on both sides of d - 2 - 2 dim F.

    ``k_ladder`` holds the dimensions d; ``members`` the sets.
    """
    tallies = []
    sets = [CompactSet1D.from_text(text) for text in cfg.members]
    for d in cfg.k_ladder:
        for k, F in enumerate(sets):
            dim = 0.0 if F.is_finite else 1.0
            crit = critical_alpha(F, d)
            ok = crit == d - 2 - 2 * dim
            if crit > 0:
                below = upsilon(F, PsiFunction.psi_alpha(0.9 * crit), d, nodes=cfg.nodes)
                above = upsilon(F, PsiFunction.psi_alpha(1.1 * crit), d, nodes=cfg.nodes)
                ok &= below.classification == "finite" and above.classification == "infinite"
            param = 10 * d + k
            tallies += [Tally.fixed("critical", param, crit),
                        Tally.fixed("threshold_ok", param, _flag(ok))]
        positive = [critical_alpha(F, d) for F in sets if critical_alpha(F, d) > 0]
        if positive:
            alpha = 0.9 * min(positive)
            verdict = fin_loc_classify(Decomposition(tuple(sets)), PsiFunction.psi_alpha(alpha), d)
            tallies.append(Tally.fixed("fin_loc_ok", d, _flag(verdict)))
    return tallies


# ----------------------------------------------------------------------------
# Capacity, dimension and simulate runs
# ----------------------------------------------------------------------------

def build_kernel(cfg: ExperimentConfig) -> capkit.Kernel:
    if cfg.kernel == "riesz":
        if cfg.beta is None:
            raise DomainError("riesz kernel needs beta")
        return capkit.Kernel.riesz(cfg.beta)
    if cfg.kernel == "constant":
        return capkit.Kernel.constant(1.0)
    if cfg.eps is None or cfg.dim is None:
        raise DomainError(f"{cfg.kernel} kernel needs eps and dim")
    return capkit.Kernel.eps_family(cfg.kernel, cfg.eps, cfg.dim)


def _summarize_capacity(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    report.fits["capacity"] = {name: report.value(name)
                               for name in ("capacity", "energy", "duality_gap", "iterations")}
    report.fits["solver"] = _capacity_options()
    converged = report.value("converged") == 1.0
    report.check("converged", converged if converged else INCONCLUSIVE)


@register(
    "capacity",
    summarize=_summarize_capacity,
    validate=build_kernel,
    defaults={"set": "1,2", "beta": 0.5, "atoms": 1024},
    policies={"diagonal": capkit.DIAGONAL_POLICY, "solver": "away-step Frank-Wolfe"},
    monte_carlo=False,
)
def capacity(cfg: ExperimentConfig, context: RunContext) -> tuple[list[Tally], dict]:
    """Capacity of F for one kernel, its minimizing measure and the hitting capacities."""
    kernel = build_kernel(cfg)
    result = capkit.capacity(cfg.F, kernel, cfg.atoms, **_capacity_options())
    record = capkit.MeasureRecord(kernel, result.minimizer,
                                  {"set": cfg.F.to_text(), "capacity": result.capacity})
    radii = [2.0 ** -j for j in range(1, 7)]
    tallies = [
        Tally.fixed("capacity", 0, result.capacity),
        Tally.fixed("energy", 0, result.energy),
        Tally.fixed("duality_gap", 0, result.duality_gap),
        Tally.fixed("iterations", 0, result.iterations),
        Tally.fixed("converged", 0, _flag(result.converged)),
        Tally.fixed("frostman", 1.0, capkit.frostman_ratio(result.minimizer, 1.0, radii)),
    ]
    if cfg.dim is not None and cfg.dim >= 3 and cfg.kernel == "riesz":
        zero, double = capkit.hitting_capacities(cfg.F, cfg.dim, min(cfg.atoms, 512))
        tallies += [Tally.fixed("cap_zero_set", cfg.dim, zero),
                    Tally.fixed("cap_double_points", cfg.dim, double)]
    return tallies, {"minimizer": record}


def _summarize_dimension(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    mink_lo, mink_up = report.value("minkowski_lower"), report.value("minkowski_upper")
    ent_lo, ent_up = report.value("entropy_lower"), report.value("entropy_upper")
    report.fits["dimension"] = {"minkowski": [mink_lo, mink_up], "entropy": [ent_lo, ent_up],
                                "packing": report.value("packing")}
    report.check("ordered", mink_lo <= mink_up and ent_lo <= ent_up)


@register(
    "dimension",
    summarize=_summarize_dimension,
    defaults={"set": "1,2", "k_ladder": [2 ** j for j in range(3, 11)], "alpha_ladder": [0.5, 1.0]},
    policies={"growth": "max/min local slopes over 3-scale windows in the finer half"},
    monte_carlo=False,
)
def dimension(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Minkowski, entropy and packing dimension estimates and Hausdorff cover bounds of F."""
    F = cfg.F
    mink = minkowski_dimension(F, cfg.k_ladder)
    ent = entropy_dimension(F, [1.0 / n for n in cfg.k_ladder])
    members = [CompactSet1D.from_text(m) for m in cfg.members] or \
        [CompactSet1D((pair,)) for pair in F.intervals]
    packing = packing_dimension(Decomposition(tuple(members)), cfg.k_ladder)
    r = 1.0 / cfg.k_ladder[-1]
    tallies = [
        Tally.fixed("minkowski_upper", 0, mink.upper),
        Tally.fixed("minkowski_lower", 0, mink.lower),
        Tally.fixed("entropy_upper", 0, ent.upper),
        Tally.fixed("entropy_lower", 0, ent.lower),
        Tally.fixed("packing", 0, packing),
    ]
    tallies += [Tally.fixed("hausdorff_upper", a,
                            hausdorff_measure_upper(F, MeasureFunction.power(a), r))
                for a in cfg.alpha_ladder]
    return tallies


def _modulus_k(ns: int, nt: int, s_max: float, t_max: float) -> int:
    if s_max < 2 or t_max < 2:
        return 0
    best = 0
    k = 2
    while k <= min(ns, nt):
        a, b = ns / (s_max * k), nt / (t_max * k)
        if a == int(a) and b == int(b) and a >= 4 and b >= 4:
            best = k
        k *= 2
    return best


def _summarize_simulate(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    for series in ("terminal", "slice_qv", "rectangle"):
        t = report.tally(series, 0)
        mean, se = t.estimate()[0], t.stderr()
        report.fits[series] = {"mean": mean, "stderr": se, "expected": 1.0}
        if len(t.values) < 2:
            report.check(series, INCONCLUSIVE)
        else:
            report.check(series, abs(mean - 1.0) <= 5 * se)
    for t in report.series("modulus"):
        estimate, lo, hi, _ = t.estimate()
        report.fits["modulus"] = {"k": t.param, "frequency": estimate, "ci": [lo, hi]}


def _validate_simulate(cfg: ExperimentConfig) -> None:
    cfg.grid_spec()
    if cfg.s > cfg.s_max:
        raise DomainError(f"slice s = {cfg.s} outside [0, {cfg.s_max}]")


@register(
    "simulate",
    summarize=_summarize_simulate,
    validate=_validate_simulate,
    defaults={"grid": "256x256", "trials": 16},
    policies={"normalization": "terminal |B|^2 / (s t d), slice quadratic variation / (s t d), "
                               "rectangle mass^2 / (area d)"},
)
def simulate(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Simulate sheets on the grid and compare variance functionals with their exact values."""
    spec = cfg.grid_spec()
    d = spec.dim
    k = _modulus_k(spec.ns, spec.nt, spec.s_max, spec.t_max)
    i1, j1 = spec.ns // 4, spec.nt // 4
    i2, j2 = spec.ns // 2, spec.nt // 2
    area = (i2 - i1) * spec.ds * (j2 - j1) * spec.dt

    def one(trial: int) -> tuple[float, float, float, bool]:
        sheet = build_sheet(sample_white_noise(spec.with_seed(trial_seed(cfg, trial))))
        terminal = float(np.sum(sheet.at(spec.s_max, spec.t_max) ** 2))
        path = slice_at(sheet, cfg.s)
        qv = float(np.sum(np.diff(path.points, axis=0) ** 2))
        s = path.meta["s"]
        mass = float(np.sum(sheet.rectangle(i1, j1, i2, j2) ** 2))
        held = modulus_holds(sheet, k, cfg.threshold_n) if k else False
        return (terminal / (spec.s_max * spec.t_max * d),
                qv / (s * spec.t_max * d) if s > 0 else math.nan,
                mass / (area * d), held)

    results = context.map_trials(one, range(*cfg.trial_range), desc="sheets")
    trials = range(*cfg.trial_range)
    tallies = [
        Tally.mean("terminal", 0, {i: r[0] for i, r in zip(trials, results)}),
        Tally.mean("slice_qv", 0, {i: r[1] for i, r in zip(trials, results)}),
        Tally.mean("rectangle", 0, {i: r[2] for i, r in zip(trials, results)}),
    ]
    if k:
        tallies.append(Tally.proportion("modulus", k, sum(r[3] for r in results), cfg.trials))
    return tallies
