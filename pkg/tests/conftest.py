import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


def random_channel(gen, m, n, k=2):
    from thzirs.channel import ChannelRealization, complex_gaussian

    return ChannelRealization(
        complex_gaussian(gen, (k, m)),
        complex_gaussian(gen, (m, n)),
        complex_gaussian(gen, n),
        gen.uniform(0, 2 * np.pi, k),
        float(gen.uniform(0, 2 * np.pi)),
    )


def random_phases(gen, m, n):
    from thzirs.metrics import PhaseConfig

    return PhaseConfig(gen.uniform(0, 2 * np.pi, m), gen.uniform(0, 2 * np.pi, n))


_ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Collect one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
