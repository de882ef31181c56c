import numpy as np
import pytest

from treataccel import DesignSpec, default_config, simulate_cohort
from treataccel.simulate import DEFAULT_DESIGN_TEXT


@pytest.fixture(scope="session")
def default_design():
    return DesignSpec.parse(DEFAULT_DESIGN_TEXT)


@pytest.fixture(scope="session")
def small_cohort():
    """Mid-size simulated cohort shared by estimator-level tests."""
    return simulate_cohort(default_config(), n=400, seed=7)


@pytest.fixture(scope="session")
def event_grid(small_cohort):
    term = np.array([s.terminal_time for s in small_cohort.subjects])
    died = np.array([s.terminal_kind == "outcome" for s in small_cohort.subjects])
    return np.unique(term[died])
