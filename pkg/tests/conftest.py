import numpy as np
import pytest

from zsl_pose.catalog import default_catalog
from zsl_pose.schema import CLASSIFICATION, AttributeSpace, JointSpec, build_default_space

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def space():
    return build_default_space()


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture
def toy_space():
    """Elbow (regression) followed by a 3-label hand."""
    return AttributeSpace((
        JointSpec("elbow"),
        JointSpec("hand", kind=CLASSIFICATION, labels=("normal", "grasp", "pointing")),
    ))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
