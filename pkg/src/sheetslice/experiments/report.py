"""Experiment reports built from mergeable per-point tallies."""
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np

from ..core.stats import Z975, mean_interval, wilson_interval
from ..errors import MergeError

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

PROPORTION, MEAN, VALUE = "proportion", "mean", "value"


@dataclass
class Tally:
    """Raw material for one parameter point of one series.

    ``proportion`` tallies count Bernoulli successes, ``mean`` tallies keep one
    value per trial index and ``value`` tallies hold a deterministic result.
    """

    series: str
    param: float
    kind: str
    successes: int = 0
    n: int = 0
    values: dict[int, float] = field(default_factory=dict)
    value: float = math.nan

    @property
    def key(self) -> tuple[str, float]:
        return self.series, self.param

    @classmethod
    def proportion(cls, series: str, param: float, successes: int, n: int) -> "Tally":
        return cls(series, float(param), PROPORTION, successes=int(successes), n=int(n))

    @classmethod
    def mean(cls, series: str, param: float, values: dict[int, float]) -> "Tally":
        return cls(series, float(param), MEAN, values=dict(values))

    @classmethod
    def fixed(cls, series: str, param: float, value: float) -> "Tally":
        return cls(series, float(param), VALUE, value=float(value))

    def estimate(self) -> tuple[float, float, float, int]:
        """(estimate, ci_lo, ci_hi, n_trials)."""
        if self.kind == PROPORTION:
            if self.n == 0:
                return math.nan, 0.0, 1.0, 0
            lo, hi = wilson_interval(self.successes, self.n)
            return self.successes / self.n, lo, hi, self.n
        if self.kind == MEAN:
            ordered = [self.values[i] for i in sorted(self.values)]
            mean, lo, hi = mean_interval(ordered)
            return mean, lo, hi, len(ordered)
        return self.value, self.value, self.value, 1

    def stderr(self) -> float:
        if self.kind == PROPORTION:
            if self.n == 0:
                return math.inf
            p = self.successes / self.n
            return math.sqrt(max(p * (1 - p), 1.0 / self.n) / self.n)
        if self.kind == MEAN:
            values = np.array([self.values[i] for i in sorted(self.values)])
            return float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.inf
        return 0.0

    def pooled(self, other: "Tally") -> "Tally":
        if self.key != other.key or self.kind != other.kind:
            raise MergeError(f"cannot pool {self.kind} {self.key} with {other.kind} {other.key}")
        if self.kind == PROPORTION:
            return Tally.proportion(self.series, self.param, self.successes + other.successes,
                                    self.n + other.n)
        if self.kind == MEAN:
            if set(self.values) & set(other.values):
                raise MergeError(f"trial indices overlap in {self.key}")
            return Tally.mean(self.series, self.param, {**self.values, **other.values})
        if not (self.value == other.value or (math.isnan(self.value) and math.isnan(other.value))):
            raise MergeError(f"deterministic value {self.key} differs between reports")
        return Tally.fixed(self.series, self.param, self.value)


@dataclass
class ExperimentReport:
    """Tallies plus the fits, checks and notes derived from them.

    Everything except ``artifacts`` is reproducible from (config, seed);
    timings are logged, never stored.
    """

    name: str
    config: dict[str, Any]
    config_hash: str
    seed: int
    trial_ranges: list[tuple[int, int]]
    tallies: list[Tally] = field(default_factory=list)
    fits: dict[str, dict[str, Any]] = field(default_factory=dict)
    checks: dict[str, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    extras: dict[str, Any] = field(default_factory=dict)
    policies: dict[str, str] = field(default_factory=dict)
    status: str = "ok"
    error: Optional[str] = None
    artifacts: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def outcome(self) -> str:
        """fail if any check fails or the run failed, inconclusive if any is, else pass."""
        if self.status == "failed" or FAIL in self.checks.values():
            return FAIL
        if INCONCLUSIVE in self.checks.values():
            return INCONCLUSIVE
        return PASS

    @property
    def n_trials(self) -> int:
        return sum(b - a for a, b in self.trial_ranges)

    def add(self, tallies: Iterable[Tally]) -> None:
        self.tallies.extend(tallies)

    def series(self, name: str) -> list[Tally]:
        return sorted((t for t in self.tallies if t.series == name), key=lambda t: t.param)

    def tally(self, series: str, param: float) -> Tally:
        for t in self.tallies:
            if t.series == series and t.param == float(param):
                return t
        raise KeyError(f"no tally {series}={param}")

    def value(self, series: str, param: float = 0.0) -> float:
        return self.tally(series, param).estimate()[0]

    def check(self, name: str, verdict: bool | str) -> None:
        if isinstance(verdict, str):
            self.checks[name] = verdict
        else:
            self.checks[name] = PASS if verdict else FAIL

    def note(self, text: str) -> None:
        if text not in self.notes:
            self.notes.append(text)

    def rows(self) -> list[dict[str, Any]]:
        """One row per tally in (series, param) order for the CSV writer."""
        out = []
        for t in sorted(self.tallies, key=lambda t: (t.series, t.param)):
            estimate, lo, hi, n = t.estimate()
            out.append({"param": f"{t.series}={t.param:.12g}", "estimate": estimate,
                        "ci_lo": lo, "ci_hi": hi, "n_trials": n})
        return out

    def clear_summary(self) -> None:
        self.fits, self.checks, self.notes, self.extras = {}, {}, [], {}


def half_width(t: Tally) -> float:
    _, lo, hi, _ = t.estimate()
    return 0.5 * (hi - lo)


def pool_tallies(first: Iterable[Tally], second: Iterable[Tally]) -> list[Tally]:
    """Pool tallies by (series, param); the result is sorted, so pooling commutes."""
    pooled: dict[tuple[str, float], Tally] = {}
    for t in list(first) + list(second):
        pooled[t.key] = pooled[t.key].pooled(t) if t.key in pooled else t
    return [pooled[k] for k in sorted(pooled)]


def ratio_interval(num: Tally, den: Tally, both: Tally) -> tuple[float, float, float]:
    """Ratio of two proportions measured on the same trials, with a delta-method CI.

    ``both`` counts trials where both events happened; it supplies the covariance.
    """
    n = num.n
    if n == 0 or den.successes == 0:
        return math.nan, math.nan, math.nan
    p1, p2, p12 = num.successes / n, den.successes / n, both.successes / n
    ratio = p1 / p2
    var = (p1 * (1 - p1) / p2 ** 2 + p1 ** 2 * p2 * (1 - p2) / p2 ** 4
           - 2 * p1 * (p12 - p1 * p2) / p2 ** 3) / n
    half = Z975 * math.sqrt(max(var, 0.0))
    return ratio, ratio - half, ratio + half
