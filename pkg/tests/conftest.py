import numpy as np
import pytest

from ma1pileup.noise import Ma1Config, NoiseSpec, replicate_rng, simulate_ma1

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion_report():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def make_sample(theta0=1.0, n=50, family="laplace", seed=0, replicate=0):
    return simulate_ma1(Ma1Config(theta0, n, seed), NoiseSpec.of(family), replicate_rng(seed, replicate))
