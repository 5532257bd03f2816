import numpy as np
import pytest

from turnpike_hyp.system import build_system


@pytest.fixture
def transport():
    """Pure transport D = diag(1, -1) on [0, 1]."""
    return build_system(1.0, 0.0, 1.0, -1.0)


@pytest.fixture
def example1():
    """Constant diagonal system with damping: D = diag(1, -1), M = I, eta0 = -1."""
    return build_system(1.0, -1.0, 1.0, -1.0, M=np.eye(2))


@pytest.fixture
def variable():
    """Coupled system with x-dependent speeds and a non-symmetric M."""
    return build_system(
        4.0,
        -0.5,
        lambda x: 1 + 0.3 * x,
        lambda x: -1.2 + 0.2 * np.sin(x),
        M=np.array([[0.3, 1.0], [-0.4, 0.2]]),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_log(request):
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def log(line):
        lines.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
