import pytest

from blockleak.codec import CodeConfig, assign_codewords
from blockleak.mockservice import MockService, ServiceState
from blockleak.planner import build_block_plan
from blockleak.rttsim import preset

EXAMPLE_USERS = ["Alice", "Bob", "Carol", "Dave", "Erin", "Frank", "Grace", "Heidi"]

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def example_registry():
    return assign_codewords(EXAMPLE_USERS, CodeConfig.for_targets(len(EXAMPLE_USERS)))


@pytest.fixture
def example_plan(example_registry):
    return build_block_plan(example_registry)


@pytest.fixture
def wild_registry():
    """Ten targets with random 24-bit arrays and RS(r=4, K=2) parity."""
    targets = [f"target-{i}" for i in range(10)]
    return assign_codewords(targets, CodeConfig(10, 24, 4, 2), shuffle_seed=2017)


@pytest.fixture
def fast_facebook():
    """Facebook-shaped timings compressed 10x so loopback runs stay short."""
    return preset("facebook").scaled(0.1)


@pytest.fixture
def live_service(fast_facebook):
    state = ServiceState(fast_facebook, seed=11)
    with MockService(state) as svc:
        yield svc


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line; all lines are repeated in the run summary."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: s.split(":")[0]):
            terminalreporter.write_line(line)
