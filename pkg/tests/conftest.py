"""Pytest configuration."""
import sys
from pathlib import Path

import pytest

# Add src to path
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from sheetslice.core.randfield import GridSpec  # noqa: E402
from sheetslice.core.setkit import CompactSet1D  # noqa: E402


@pytest.fixture(scope="session")
def temp_output_dir(tmp_path_factory):
    """Temporary directory for test outputs."""
    return tmp_path_factory.mktemp("output")


@pytest.fixture
def small_spec():
    """8x8 grid on [0, 2]^2 in R^2."""
    return GridSpec(s_max=2.0, t_max=2.0, ns=8, nt=8, dim=2, seed=42)


@pytest.fixture
def interval():
    return CompactSet1D.of((1, 2))


@pytest.fixture
def four_points():
    return CompactSet1D.from_text("1;1.25;1.5;1.75")
