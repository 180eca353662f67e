"""Shared fixtures for the relstar test suite."""

from __future__ import annotations

import numpy as np
import pytest

from relstar.grid import GridSpec


@pytest.fixture
def grid16():
    """Small cheap grid for algebraic / property tests."""
    return GridSpec(16, 8.0)


@pytest.fixture
def grid24():
    """Medium grid for quadrature-oracle comparisons."""
    return GridSpec(24, 12.0)


@pytest.fixture
def grid32():
    """Grid fine enough for percent-level physics oracles."""
    return GridSpec(32, 16.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
