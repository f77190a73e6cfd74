import pytest
from hypothesis import HealthCheck, settings

from tmrm.envs import build_fig1_env, generate_traces
from tmrm.pipeline import infer_machines

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def fig1_env():
    return build_fig1_env()


@pytest.fixture(scope="session")
def fig1_traces(fig1_env):
    return generate_traces(fig1_env, 500, 50, seed=1)


@pytest.fixture(scope="session")
def fig1_machines(fig1_traces):
    return infer_machines(fig1_traces)


@pytest.fixture
def acceptance_report():
    def report(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
