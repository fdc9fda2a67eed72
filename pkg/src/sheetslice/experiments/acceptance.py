"""Acceptance suites and the cross-thread determinism experiment."""
import logging
from dataclasses import dataclass, field
from typing import Any, Optional

from ..exporters.csv_report import ReportCSVWriter
from .config import ExperimentConfig
from .harness import EXPERIMENTS, RunContext, make_config, register, run
from .report import FAIL, INCONCLUSIVE, PASS, ExperimentReport, Tally

logger = logging.getLogger(__name__)

DETERMINISM_THREADS = (1, 8)
CELL_LADDER = [256, 512, 1024, 2048, 4096]


@dataclass(frozen=True)
class SuiteEntry:
    """One acceptance item: a registered experiment and the overrides it runs with."""

    label: str
    experiment: str
    overrides: dict[str, Any] = field(default_factory=dict)


DESK_SUITE: tuple[SuiteEntry, ...] = (
    SuiteEntry("covariance", "covariance_law"),
    SuiteEntry("entropy", "entropy_checks"),
    SuiteEntry("kernels", "kernel_sandwich"),
    SuiteEntry("energy", "energy_oracle"),
    SuiteEntry("taylor", "taylor_trend"),
    SuiteEntry("projection", "projection"),
    SuiteEntry("bm_d3", "hit_prob_bm", {"dim": 3, "trials": 100_000}),
    SuiteEntry("bm_d5", "hit_prob_bm", {"dim": 5, "trials": 100_000}),
    SuiteEntry("two_bm", "hit_prob_two_bm"),
    SuiteEntry("sheet_interval", "hit_prob_sheet", {"dim": 5, "set": "1,2"}),
    SuiteEntry("sheet_points", "hit_prob_sheet",
               {"dim": 3, "set": "1;1.25;1.5;1.75", "reference_set": "1", "level_ratio": 4.0,
                "eps_ladder": [0.25, 0.3, 0.4, 0.5], "trials": 400}),
    SuiteEntry("zeros_d2", "zero_projection_scan", {"dim": 2, "k_ladder": [2048], "trials": 8}),
    SuiteEntry("zeros_d3", "zero_projection_scan", {"dim": 3, "k_ladder": [4096], "trials": 8}),
    SuiteEntry("cells_d1", "good_cell_counts", {"dim": 1, "k_ladder": CELL_LADDER}),
    SuiteEntry("cells_d2", "good_cell_counts", {"dim": 2, "k_ladder": CELL_LADDER}),
    SuiteEntry("cells_d3", "good_cell_counts", {"dim": 3, "k_ladder": CELL_LADDER}),
    SuiteEntry("double_d4", "double_point_scan", {"dim": 4, "grid": "512x512"}),
    SuiteEntry("double_d5", "double_point_scan", {"dim": 5, "grid": "512x512"}),
    SuiteEntry("upsilon", "upsilon_thresholds"),
    SuiteEntry("escape", "escape_rate_probe"),
    SuiteEntry("determinism", "determinism"),
)

# Reduced sizes: a smoke run of every experiment, and the configs the
# determinism experiment compares across thread counts.
QUICK_OVERRIDES: dict[str, dict[str, Any]] = {
    "covariance_law": {"grid": "8x8", "trials": 200, "pairs": 6},
    "entropy_checks": {"trials": 20},
    "kernel_sandwich": {"trials": 10_000},
    "energy_oracle": {"atom_ladder": [64, 256]},
    "taylor_trend": {"atom_ladder": [32, 64, 128, 256]},
    "projection": {"atoms": 16},
    "hit_prob_bm": {"trials": 300, "steps": 64},
    "hit_prob_two_bm": {"trials": 600, "steps": 64},
    "hit_prob_sheet": {"grid": "64x64", "eps_ladder": [0.3, 0.4, 0.5], "trials": 8},
    "zero_projection_scan": {"k_ladder": [128], "trials": 2},
    "good_cell_counts": {"k_ladder": [16, 32, 64], "trials": 2},
    "double_point_scan": {"grid": "64x64", "trials": 2},
    "upsilon_thresholds": {"nodes": 200},
    "escape_rate_probe": {"trials": 40, "epochs": 8, "steps": 32, "columns": 4},
    "simulate": {"dim": 2, "grid": "32x32", "trials": 4},
    "determinism": {"members": ["hit_prob_bm", "covariance_law"]},
}

QUICK_SUITE: tuple[SuiteEntry, ...] = tuple(
    SuiteEntry(entry.label, entry.experiment,
               {**entry.overrides, **QUICK_OVERRIDES.get(entry.experiment, {})})
    for entry in DESK_SUITE
)


def combined_outcome(reports: list[ExperimentReport]) -> str:
    outcomes = {r.outcome for r in reports}
    if FAIL in outcomes:
        return FAIL
    if INCONCLUSIVE in outcomes:
        return INCONCLUSIVE
    return PASS


def run_suite(entries: tuple[SuiteEntry, ...] | list[SuiteEntry],
              layers: Optional[list[dict[str, Any]]] = None,
              context: Optional[RunContext] = None) -> list[tuple[SuiteEntry, ExperimentReport]]:
    """Run suite entries in order; ``layers`` (file then flags) go on top of each entry.

    Args:
        entries: Suite entries to run
        layers: Extra key-value layers, e.g. a seed override
        context: Thread count and progress display

    Returns:
        (entry, report) pairs in suite order
    """
    results = []
    for k, entry in enumerate(entries, 1):
        logger.info(f"[{k}/{len(entries)}] {entry.label}: {entry.experiment}")
        cfg = make_config(entry.experiment, entry.overrides, *(layers or []))
        report = run(cfg, context)
        results.append((entry, report))
    return results


def _monte_carlo_names() -> list[str]:
    return sorted(name for name, exp in EXPERIMENTS.items()
                  if exp.monte_carlo and name != "determinism")


def _summarize_determinism(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    names = cfg.members or _monte_carlo_names()
    mismatched = [names[int(t.param)] for t in report.series("identical") if t.value != 1.0]
    report.fits["determinism"] = {"experiments": names, "threads": list(DETERMINISM_THREADS),
                                  "mismatched": mismatched}
    report.check("determinism", not mismatched)


@register(
    "determinism",
    summarize=_summarize_determinism,
    defaults={"trials": 1},
    policies={"comparison": "CSV and header bytes of reduced runs at "
                            f"{' and '.join(map(str, DETERMINISM_THREADS))} threads"},
    monte_carlo=False,
)
def determinism(cfg: ExperimentConfig, context: RunContext) -> list[Tally]:
    """Rerun each experiment in ``members`` at reduced size per thread count; compare bytes."""
    writer = ReportCSVWriter()
    tallies = []
    for k, name in enumerate(cfg.members or _monte_carlo_names()):
        reduced = make_config(name, QUICK_OVERRIDES.get(name, {}), {"seed": cfg.seed})
        renders = {writer.render(run(reduced, RunContext(threads=n))) for n in DETERMINISM_THREADS}
        if len(renders) != 1:
            logger.warning(f"{name}: reports differ across thread counts")
        tallies.append(Tally.fixed("identical", k, 1.0 if len(renders) == 1 else 0.0))
    return tallies
