import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bixon_jortner import InitialState, ModelParams

settings.register_profile(
    "suite",
    max_examples=60,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# one line per acceptance criterion, echoed after the run summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def params():
    """The workhorse parameter point: w=0.4, delta=1, zero detuning."""
    return ModelParams(delta_g=0.0, delta=1.0, w=0.4, n_max=1000, k_max=8)


@pytest.fixture
def params_detuned():
    return ModelParams(delta_g=0.24, delta=1.0, w=0.4, n_max=1000, k_max=8)


@pytest.fixture
def ground():
    return InitialState.ground()


def random_initial_state(rng, support):
    """Normalized random complex amplitudes on b plus the given levels."""
    raw = rng.normal(size=len(support) + 1) + 1j * rng.normal(size=len(support) + 1)
    raw /= np.linalg.norm(raw)
    return InitialState.from_mapping(
        raw[0], {n: raw[i + 1] for i, n in enumerate(support)}
    )
