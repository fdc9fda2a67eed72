"""Report writers: CSV with a JSON header sidecar, and SVG log-log plots."""
from .csv_report import ReportCSVWriter, report_dir
from .svg_plot import LogLogPlotter

__all__ = ["ReportCSVWriter", "LogLogPlotter", "report_dir"]
