"""Shared fixtures: seeded generators, the analyzer and the catalogue instances."""

from pathlib import Path

import numpy as np
import pytest

from errbound.services.analyzer_service import AnalyzerService
from errbound.services.problem_service import builtin_instance

PROBLEMS_DIR = Path(__file__).resolve().parent.parent / "problems"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def analyzer():
    return AnalyzerService(workers=1)


@pytest.fixture(scope="session")
def cubic_regular():
    return builtin_instance("cubic-regular")


@pytest.fixture(scope="session")
def cubic_degenerate():
    return builtin_instance("cubic-degenerate")


@pytest.fixture(scope="session")
def orthant_corner():
    return builtin_instance("orthant-corner", radii=(1e-1, 1e-2), samples_per_radius=80)


@pytest.fixture(scope="session")
def halfline():
    return builtin_instance("halfline", radii=(1e-1, 1e-2), samples_per_radius=40)


@pytest.fixture
def problems_dir():
    return PROBLEMS_DIR
