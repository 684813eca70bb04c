import numpy as np
import pytest

from tennis_sel.dataset import generate_synthetic
from tennis_sel.features import FEATURE_ORDER, annotate_pre_match_elo, build_design

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synth3():
    return generate_synthetic(3, 4, 128, seed=1)


@pytest.fixture(scope="session")
def small_data():
    return generate_synthetic(2, 4, 32, seed=3)


@pytest.fixture(scope="session")
def design3(synth3):
    return build_design(annotate_pre_match_elo(synth3), FEATURE_ORDER)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
