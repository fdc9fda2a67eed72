"""Experiment registry, trial scheduling, run and merge."""
import logging
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from ..errors import DomainError, MergeError
from ..utils.rng import derive_rng, stream_id
from .config import ExperimentConfig, build_config
from .report import ExperimentReport, Tally, pool_tallies

logger = logging.getLogger(__name__)

T = TypeVar("T")

# A collector returns its tallies, optionally paired with artifacts (files, not results).
Collected = list[Tally] | tuple[list[Tally], dict[str, Any]]
Collector = Callable[[ExperimentConfig, "RunContext"], Collected]
Summarizer = Callable[[ExperimentReport, ExperimentConfig], None]
Validator = Callable[[ExperimentConfig], None]


@dataclass
class RunContext:
    """Execution knobs shared by every experiment; none of them changes results."""

    threads: int = 1
    progress: bool = False

    def map_trials(self, func: Callable[[int], T], trials: Iterable[int],
                   desc: str = "trials") -> list[T]:
        """Apply ``func`` to every trial index, returning results in trial order."""
        trials = list(trials)
        show = self.progress and sys.stderr.isatty() and logger.isEnabledFor(logging.INFO)
        if self.threads <= 1:
            return [func(i) for i in tqdm(trials, desc=desc, disable=not show, leave=False)]
        runner = Parallel(n_jobs=self.threads, prefer="threads", return_as="generator")
        results = runner(delayed(func)(i) for i in trials)
        return list(tqdm(results, total=len(trials), desc=desc, disable=not show, leave=False))


@dataclass(frozen=True)
class Experiment:
    name: str
    collect: Collector
    summarize: Summarizer
    validate: Optional[Validator] = None
    defaults: dict[str, Any] = field(default_factory=dict)
    policies: dict[str, str] = field(default_factory=dict)
    monte_carlo: bool = True


EXPERIMENTS: dict[str, Experiment] = {}


def register(name: str, summarize: Summarizer, validate: Optional[Validator] = None,
             defaults: Optional[dict[str, Any]] = None, policies: Optional[dict[str, str]] = None,
             monte_carlo: bool = True) -> Callable[[Collector], Collector]:
    """Register the decorated collector under ``name``."""
    def wrap(collect: Collector) -> Collector:
        EXPERIMENTS[name] = Experiment(name, collect, summarize, validate, dict(defaults or {}),
                                       dict(policies or {}), monte_carlo)
        return collect
    return wrap


def get_experiment(name: str) -> Experiment:
    if name not in EXPERIMENTS:
        raise DomainError(f"unknown experiment '{name}'; known: {', '.join(sorted(EXPERIMENTS))}")
    return EXPERIMENTS[name]


def make_config(name: str, *layers: dict[str, Any]) -> ExperimentConfig:
    """Config for ``name`` from its registered defaults overlaid by ``layers``."""
    return build_config(name, get_experiment(name).defaults, *layers)


def trial_rng(cfg: ExperimentConfig, trial: int, *keys: int) -> np.random.Generator:
    """Generator for one trial: (master seed, experiment stream, trial index, *keys)."""
    return derive_rng(cfg.seed, stream_id(cfg.name), trial, *keys)


def trial_seed(cfg: ExperimentConfig, trial: int, *keys: int) -> int:
    """64-bit seed for samplers that take a seed rather than a generator."""
    return int(trial_rng(cfg, trial, *keys).integers(0, 2**63))


def count_hits(minima: Sequence[np.ndarray], ladder: Sequence[float]) -> np.ndarray:
    """Hit counts per ladder radius from per-trial minima (stacked in trial order)."""
    minima = np.asarray(minima)
    return np.array([int(np.count_nonzero(minima <= r)) for r in ladder])


def _new_report(cfg: ExperimentConfig, experiment: Experiment) -> ExperimentReport:
    return ExperimentReport(
        name=cfg.name,
        config=cfg.hashed_fields(),
        config_hash=cfg.config_hash(),
        seed=cfg.seed,
        trial_ranges=[cfg.trial_range],
        policies=dict(experiment.policies),
    )


def run(cfg: ExperimentConfig, context: Optional[RunContext] = None) -> ExperimentReport:
    """Run one experiment.

    Precondition violations raise before any sampling. A failure while
    sampling returns a partial report with ``status == "failed"``.

    Args:
        cfg: Experiment configuration
        context: Thread count and progress display

    Returns:
        ExperimentReport with fits and checks filled in
    """
    context = context or RunContext()
    experiment = get_experiment(cfg.name)
    if experiment.validate is not None:
        experiment.validate(cfg)
    report = _new_report(cfg, experiment)
    logger.info(f"Running {cfg.name} (trials {cfg.trial_range[0]}..{cfg.trial_range[1] - 1}, "
                f"threads {context.threads})")
    started = time.perf_counter()
    try:
        collected = experiment.collect(cfg, context)
        if isinstance(collected, tuple):
            collected, artifacts = collected
            report.artifacts.update(artifacts)
        report.add(collected)
        experiment.summarize(report, cfg)
    except Exception as e:
        logger.exception(f"{cfg.name} failed: {e}")
        report.status = "failed"
        report.error = f"{type(e).__name__}: {e}"
        return report
    logger.info(f"{cfg.name} finished in {time.perf_counter() - started:.1f}s: {report.outcome}")
    return report


def merge(r1: ExperimentReport, r2: ExperimentReport) -> ExperimentReport:
    """Pool two reports of the same experiment run on disjoint trial ranges.

    Raises:
        MergeError: On a name or config-hash mismatch, overlapping trial
            ranges or a failed input report
    """
    if r1.name != r2.name:
        raise MergeError(f"cannot merge '{r1.name}' with '{r2.name}'")
    if r1.config_hash != r2.config_hash:
        raise MergeError(f"config hash mismatch ({r1.config_hash[:12]} vs {r2.config_hash[:12]})")
    if r1.status == "failed" or r2.status == "failed":
        raise MergeError("cannot merge a failed report")
    ranges = sorted(r1.trial_ranges + r2.trial_ranges)
    for (a1, b1), (a2, _) in zip(ranges, ranges[1:]):
        if a2 < b1:
            raise MergeError(f"trial ranges overlap: [{a1}, {b1}) and [{a2}, ...)")
    experiment = get_experiment(r1.name)
    cfg = ExperimentConfig(**r1.config)
    merged = ExperimentReport(
        name=r1.name,
        config=dict(r1.config),
        config_hash=r1.config_hash,
        seed=r1.seed,
        trial_ranges=ranges,
        tallies=pool_tallies(r1.tallies, r2.tallies),
        policies=dict(experiment.policies),
    )
    experiment.summarize(merged, cfg)
    return merged
