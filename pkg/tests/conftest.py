"""Shared fixtures: the two reference profit functions and base parameters."""

import pytest

from gbmstop.model import GbmParameters
from gbmstop.profit import gross_profit


@pytest.fixture(scope="session")
def pf_lower():
    """Reference profit with positive tail (one-sided lower problem)."""
    return gross_profit(1.0, 10.0, 1.0, 2.0, 4.0)


@pytest.fixture(scope="session")
def pf_both():
    """Reference profit with negative tail (two-sided problem)."""
    return gross_profit(1.0, 10.0, 1.0, 8.0, -5.0)


@pytest.fixture(scope="session")
def base_params():
    """Reference dynamics with roots exactly (-2, 1)."""
    return GbmParameters(r=0.1, alpha=0.1, sigma2=0.1)
