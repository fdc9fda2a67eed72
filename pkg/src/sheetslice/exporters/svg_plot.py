"""Log-log plots of the slope fits of a report."""
import logging
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..experiments.report import ExperimentReport  # noqa: E402
from .csv_report import report_dir  # noqa: E402

logger = logging.getLogger(__name__)

SVG_SALT = "sheetslice"


class LogLogPlotter:
    """Draw every fitted series of a report on log-log axes with its CI bars."""

    def __init__(self, width: float = 6.0, height: float = 4.5):
        self.figsize = (width, height)

    @staticmethod
    def plottable(report: ExperimentReport) -> list[str]:
        """Fit names that point at a series of the report."""
        return [name for name, fit in report.fits.items()
                if isinstance(fit, dict) and report.series(fit.get("series", ""))]

    def plot(self, report: ExperimentReport, output_dir: str | Path) -> Optional[Path]:
        """Write ``plot.svg`` next to the report files, or nothing if no fit has a series."""
        names = self.plottable(report)
        if not names:
            logger.debug(f"{report.name}: nothing to plot")
            return None
        matplotlib.rcParams["svg.hashsalt"] = SVG_SALT
        fig, ax = plt.subplots(figsize=self.figsize)
        try:
            for name in names:
                fit = report.fits[name]
                tallies = [t for t in report.series(fit["series"]) if t.param > 0]
                rows = np.array([t.estimate()[:3] for t in tallies if t.estimate()[0] > 0])
                x = np.array([t.param for t in tallies if t.estimate()[0] > 0])
                if not len(x):
                    continue
                err = np.abs(np.vstack([rows[:, 0] - rows[:, 1], rows[:, 2] - rows[:, 0]]))
                ax.errorbar(x, rows[:, 0], yerr=err, fmt="o", capsize=3, label=name)
                if "slope" in fit and "intercept" in fit and np.isfinite(fit["slope"]):
                    grid = np.geomspace(x.min(), x.max(), 50)
                    ax.plot(grid, np.exp(fit["intercept"]) * grid ** fit["slope"], "--",
                            label=f"{name}: slope {fit['slope']:.3f}")
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel("parameter")
            ax.set_ylabel("estimate")
            ax.set_title(f"{report.name} ({report.config_hash[:12]})")
            ax.legend(fontsize="small")
            target = report_dir(report, output_dir)
            target.mkdir(parents=True, exist_ok=True)
            path = target / "plot.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
        logger.info(f"Plot written: {path}")
        return path
