"""Command-line interface: ``sheetslice <command> [options]``."""
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Optional

import click
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from rich.console import Console
from rich.table import Table

from . import __version__
from .core.capkit import write_record
from .errors import ConfigurationError, DomainError
from .experiments import ExperimentReport, RunContext, make_config, run
from .experiments.acceptance import DESK_SUITE, QUICK_SUITE, combined_outcome, run_suite
from .experiments.report import FAIL, INCONCLUSIVE, PASS
from .exporters import LogLogPlotter, ReportCSVWriter
from .utils.config import get_config, load_experiment_file
from .utils.logger import setup_logging

logger = logging.getLogger(__name__)
console = Console()

EXIT_CODES = {PASS: 0, FAIL: 1, INCONCLUSIVE: 3}
EXIT_USAGE = 2

HITPROB_KINDS = {"bm": "hit_prob_bm", "two_bm": "hit_prob_two_bm", "sheet": "hit_prob_sheet"}
ZEROS_KINDS = {"scan": "zero_projection_scan", "cells": "good_cell_counts"}


class CliConfig(BaseModel):
    """Parsed command line: what to run, where to write, and the option layers."""

    model_config = ConfigDict(frozen=True)

    command: str
    experiment: Optional[str] = None
    config_file: Optional[Path] = None
    file_values: dict[str, Any] = Field(default_factory=dict)
    overrides: dict[str, Any] = Field(default_factory=dict)
    output_dir: Path = Path("out")
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    threads: int = Field(default=1, ge=1)
    plot: bool = True
    log_level: Optional[str] = None
    desk: bool = False

    @field_validator("output_dir")
    @classmethod
    def _writable(cls, value: Path) -> Path:
        probe = value
        while not probe.exists():
            if probe.parent == probe:
                break
            probe = probe.parent
        if probe.exists() and not probe.is_dir():
            raise ValueError(f"output path {probe} is not a directory")
        if not os.access(probe, os.W_OK):
            raise ValueError(f"output directory {value} is not writable")
        return value

    def layers(self) -> list[dict[str, Any]]:
        """Option layers in increasing precedence: file values, then flags."""
        flags = dict(self.overrides)
        if self.seed is not None:
            flags["seed"] = self.seed
        return [self.file_values, flags]

    def effective_seed(self) -> Optional[int]:
        return self.seed if self.seed is not None else self.file_values.get("seed")


class FloatList(click.ParamType):
    """Comma-separated numbers, e.g. ``0.02,0.05,0.1``."""

    name = "list"

    def __init__(self, cast: Callable[[str], Any] = float):
        self.cast = cast

    def convert(self, value: Any, param: Optional[click.Parameter],
                ctx: Optional[click.Context]) -> list:
        if isinstance(value, list):
            return value
        try:
            return [self.cast(v) for v in str(value).split(",") if v.strip()]
        except ValueError:
            self.fail(f"'{value}' is not a comma-separated list of numbers", param, ctx)


FLOATS = FloatList(float)
INTS = FloatList(int)

# Keys handled by CliConfig itself; everything else is an experiment override.
_RUN_KEYS = ("config_file", "output_dir", "seed", "threads", "plot", "log_level")


def common_options(func: Callable) -> Callable:
    options = [
        click.option("--config", "config_file", type=click.Path(path_type=Path),
                     help="Experiment YAML file (flat key-value)"),
        click.option("--out", "output_dir", type=click.Path(path_type=Path), default=None,
                     help="Output root (default from configs/default.yaml)"),
        click.option("--seed", type=int, default=None, help="Master seed (wins over --config)"),
        click.option("--threads", type=click.IntRange(min=1), default=None,
                     help="Worker threads; results do not depend on it"),
        click.option("--plot/--no-plot", default=None, help="Write plot.svg for slope fits"),
        click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"],
                                                      case_sensitive=False), default=None),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def trial_options(func: Callable) -> Callable:
    func = click.option("--trial-start", type=click.IntRange(min=0), default=None,
                        help="First trial index (for runs that are merged later)")(func)
    return click.option("--trials", type=click.IntRange(min=1), default=None)(func)


def _build(command: str, experiment: Optional[str], values: dict[str, Any],
           desk: bool = False) -> CliConfig:
    runtime = get_config()
    config_file = values.get("config_file")
    try:
        file_values = load_experiment_file(config_file) if config_file else {}
    except (FileNotFoundError, ConfigurationError) as e:
        raise click.BadParameter(str(e), param_hint="--config") from e
    overrides = {k: v for k, v in values.items() if k not in _RUN_KEYS and v is not None}
    try:
        return CliConfig(
            command=command,
            experiment=experiment,
            config_file=config_file,
            file_values=file_values,
            overrides=overrides,
            output_dir=values.get("output_dir") or runtime.get("output.dir", "out"),
            seed=values.get("seed"),
            threads=values.get("threads") or runtime.get("performance.threads", 1),
            plot=runtime.get("output.plot", True) if values.get("plot") is None else values["plot"],
            log_level=values.get("log_level"),
            desk=desk,
        )
    except ValidationError as e:
        raise click.UsageError(str(e)) from e


@click.group()
@click.version_option(__version__, prog_name="sheetslice")
def cli() -> None:
    """Brownian-sheet slices: simulation, capacities and Monte Carlo acceptance checks."""


@cli.command()
@click.option("--dim", type=click.IntRange(min=1), required=True)
@click.option("--grid", default=None, help="Cells per axis, e.g. 256x256")
@click.option("--s", "s", type=float, default=None, help="Slice parameter s")
@trial_options
@common_options
def simulate(**values: Any) -> CliConfig:
    """Simulate sheets and check terminal, slice and rectangle variances."""
    return _build("simulate", "simulate", values)


@cli.command()
@click.option("--set", "set", default=None, help='Compact set, e.g. "1,2" or "1;1.5"')
@click.option("--kernel", type=click.Choice(["riesz", "constant", "f_eps", "F_eps", "G_eps"]),
              default=None)
@click.option("--beta", type=float, default=None)
@click.option("--eps", type=float, default=None)
@click.option("--dim", type=click.IntRange(min=1), default=None)
@click.option("--atoms", type=click.IntRange(min=2), default=None)
@common_options
def capacity(**values: Any) -> CliConfig:
    """Capacity of a compact set with its minimizing measure."""
    return _build("capacity", "capacity", values)


@cli.command()
@click.option("--set", "set", default=None)
@click.option("--n-values", "k_ladder", type=INTS, default=None, help="Cell densities n")
@click.option("--alpha", "alpha_ladder", type=FLOATS, default=None, help="Hausdorff orders")
@click.option("--members", "members", multiple=True, help="Decomposition pieces")
@common_options
def dimension(**values: Any) -> CliConfig:
    """Minkowski, entropy and packing dimensions and Hausdorff cover bounds."""
    values["members"] = list(values["members"]) or None
    return _build("dimension", "dimension", values)


@cli.command()
@trial_options
@common_options
def kernels(**values: Any) -> CliConfig:
    """Closed forms and sandwich constants of the f/F/G kernels."""
    return _build("kernels", "kernel_sandwich", values)


@cli.command()
@click.option("--kind", type=click.Choice(sorted(HITPROB_KINDS)), default="bm", show_default=True)
@click.option("--dim", type=click.IntRange(min=1), default=None)
@click.option("--r-ladder", "r_ladder", type=FLOATS, default=None)
@click.option("--r", "r", type=float, default=None, help="Hitting radius (two_bm)")
@click.option("--rho-ladder", "rho_ladder", type=FLOATS, default=None)
@click.option("--eps-ladder", "eps_ladder", type=FLOATS, default=None)
@click.option("--set", "set", default=None)
@click.option("--reference-set", "reference_set", default=None)
@click.option("--level-ratio", "level_ratio", type=float, default=None)
@click.option("--grid", default=None)
@click.option("--steps", type=click.IntRange(min=2), default=None)
@trial_options
@common_options
def hitprob(kind: str, **values: Any) -> CliConfig:
    """Hitting probabilities of Brownian motions and of sheet slices."""
    return _build("hitprob", HITPROB_KINDS[kind], values)


@cli.command()
@click.option("--kind", type=click.Choice(sorted(ZEROS_KINDS)), default="scan", show_default=True)
@click.option("--dim", type=click.IntRange(min=1), default=None)
@click.option("--k-ladder", "k_ladder", type=INTS, default=None)
@click.option("--threshold-n", "threshold_n", type=float, default=None)
@trial_options
@common_options
def zeros(kind: str, **values: Any) -> CliConfig:
    """Zero-set projection dimension, or good-cell counts."""
    return _build("zeros", ZEROS_KINDS[kind], values)


@cli.command()
@click.option("--dim", type=click.IntRange(min=1), default=None)
@click.option("--grid", default=None)
@click.option("--eps", type=float, default=None, help="Closeness threshold")
@click.option("--threshold-n", "threshold_n", type=float, default=None)
@trial_options
@common_options
def doublepoints(**values: Any) -> CliConfig:
    """Double-point scan of sheet slices."""
    return _build("doublepoints", "double_point_scan", values)


@cli.command()
@click.option("--dim", type=click.IntRange(min=1), default=None)
@click.option("--alpha-ladder", "alpha_ladder", type=FLOATS, default=None)
@click.option("--set", "set", default=None)
@click.option("--s", "s", type=float, default=None)
@click.option("--epochs", type=click.IntRange(min=1), default=None)
@click.option("--steps", type=click.IntRange(min=2), default=None)
@click.option("--columns", type=click.IntRange(min=1), default=None)
@trial_options
@common_options
def escape(**values: Any) -> CliConfig:
    """Escape-rate probe at a fixed slice and over a set of slices."""
    return _build("escape", "escape_rate_probe", values)


@cli.command("run")
@click.argument("experiment")
@trial_options
@common_options
def run_experiment(experiment: str, **values: Any) -> CliConfig:
    """Run any registered experiment from a config file."""
    return _build("run", experiment, values)


@cli.command("check-all")
@click.option("--desk", is_flag=True, help="Full desk-scale sizes instead of the quick smoke run")
@common_options
def check_all(desk: bool, **values: Any) -> CliConfig:
    """Run the acceptance suite."""
    return _build("check-all", None, values, desk=desk)


def parse_args(argv: Optional[list[str]] = None) -> CliConfig | int:
    """Parse a command line without running it.

    Returns:
        CliConfig, or an exit code when click handled the call itself (``--help``)

    Raises:
        click.ClickException: On usage errors (exit code 2)
    """
    args = sys.argv[1:] if argv is None else list(argv)
    return cli.main(args=args, prog_name="sheetslice", standalone_mode=False)


def _persist(report: ExperimentReport, config: CliConfig) -> Path:
    target = ReportCSVWriter().write(report, config.output_dir)
    if config.plot:
        LogLogPlotter().plot(report, config.output_dir)
    record = report.artifacts.get("minimizer")
    if record is not None:
        write_record(target / "minimizer.txt", record)
    return target


def _show(report: ExperimentReport, target: Path) -> None:
    table = Table(title=f"{report.name} [{report.outcome}]")
    table.add_column("check")
    table.add_column("verdict")
    for name, verdict in sorted(report.checks.items()):
        table.add_row(name, verdict)
    console.print(table)
    if report.name == "capacity" and report.status == "ok":
        console.print(f"capacity: {report.value('capacity'):.10g}")
        console.print(f"minimizer: {target / 'minimizer.txt'}")
    if report.error:
        console.print(f"[red]error:[/red] {report.error}")
    console.print(f"report: {target}")


def dispatch(config: CliConfig) -> int:
    """Run the parsed command, persist its reports and return the exit code."""
    runtime = get_config()
    setup_logging(config.log_level or runtime.get("logging.level", "INFO"),
                  runtime.get("logging.file"), runtime.get("logging.format"))
    context = RunContext(threads=config.threads,
                         progress=runtime.get("performance.progress", True))
    try:
        if config.command == "check-all":
            seed = config.effective_seed()
            layers = [{"seed": seed}] if seed is not None else []
            results = run_suite(DESK_SUITE if config.desk else QUICK_SUITE, layers, context)
            for _, report in results:
                _persist(report, config)
            summary = Table(title="acceptance")
            for column in ("item", "experiment", "outcome"):
                summary.add_column(column)
            for entry, report in results:
                summary.add_row(entry.label, entry.experiment, report.outcome)
            console.print(summary)
            return EXIT_CODES[combined_outcome([r for _, r in results])]
        cfg = make_config(config.experiment, *config.layers())
        report = run(cfg, context)
    except (ConfigurationError, DomainError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    target = _persist(report, config)
    _show(report, target)
    return EXIT_CODES[report.outcome]


def main(argv: Optional[list[str]] = None) -> int:
    try:
        config = parse_args(argv)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        return 1
    if isinstance(config, int):
        return config
    return dispatch(config)


if __name__ == "__main__":
    sys.exit(main())
