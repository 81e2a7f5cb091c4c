"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from specswap import GaussianJSA
from specswap.grid import angular_frequency

# carrier used throughout: 830 nm photons
CENTER = angular_frequency(830.0)

# frozen reference: K of the default profile below, from the closed form
# 1/sqrt(1 - 4 a^2 ss^2 si^2) evaluated once and pinned
K_DEFAULT = 4.998207080551978


@pytest.fixture(scope="session")
def jsa5() -> GaussianJSA:
    """Symmetric anticorrelated profile with an effective mode number near 5."""
    return GaussianJSA(center=CENTER, sigma_s=1.25, sigma_i=1.25, alpha=0.31353)


@pytest.fixture(scope="session")
def jsa_sep() -> GaussianJSA:
    """Separable control profile (no spectral correlations, K = 1)."""
    return GaussianJSA(center=CENTER, sigma_s=1.25, sigma_i=1.25, alpha=0.0)


@pytest.fixture(scope="session")
def jsa_asym() -> GaussianJSA:
    """Asymmetric-width profile, exercises code paths where sigma_s != sigma_i."""
    return GaussianJSA(center=CENTER, sigma_s=1.8, sigma_i=0.7, alpha=0.3)


def pytest_runtest_logreport(report):
    # one terminal line per release criterion, printed outside capture
    if report.when != "call" or "::test_criterion_" not in report.nodeid:
        return
    label = report.nodeid.rsplit("::test_criterion_", 1)[1]
    number, _, slug = label.partition("_")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"\ncriterion {number} ({slug.replace('_', ' ')}): {verdict}")
