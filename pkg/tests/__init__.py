"""Test suite for sheetslice."""
