"""Registered experiments; importing this package registers all of them."""
from . import analysis, escape, geometry, hitting  # noqa: F401
from . import acceptance  # noqa: F401
from .config import ExperimentConfig, build_config
from .harness import EXPERIMENTS, RunContext, get_experiment, make_config, merge, run
from .report import FAIL, INCONCLUSIVE, PASS, ExperimentReport, Tally

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentReport",
    "FAIL",
    "INCONCLUSIVE",
    "PASS",
    "RunContext",
    "Tally",
    "build_config",
    "get_experiment",
    "make_config",
    "merge",
    "run",
]
