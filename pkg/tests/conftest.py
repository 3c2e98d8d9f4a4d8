import pytest

from teacache import baselines, calibration
from teacache import model as dit
from teacache.sampler import SamplerConfig, default_condition

# calibration corpus used throughout: the first 8 seeds, modulated input
CALIBRATION_SEEDS = tuple(range(8))
EVAL_SEEDS = tuple(range(10))


@pytest.fixture(scope="session")
def weights():
    return dit.init_weights(dit.REFERENCE_CONFIG)


@pytest.fixture(scope="session")
def cond(weights):
    return default_condition(weights.config)


@pytest.fixture(scope="session")
def spec():
    return baselines.LinearScheduleSpec()


@pytest.fixture(scope="session")
def schedule(spec):
    return spec.build()


@pytest.fixture(scope="session")
def calibration_traces(weights, schedule, cond):
    return calibration.record_trace(weights, SamplerConfig(schedule), "modulated_input", CALIBRATION_SEEDS, cond)


@pytest.fixture(scope="session")
def rescaler4(calibration_traces):
    return calibration.fit_polynomial(calibration_traces, 4)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def verdict():
    def record(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[number])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
