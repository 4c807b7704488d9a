import pytest
from hypothesis import HealthCheck, settings

from nlbottleneck.model import FluxModel, MinSpeed, NoConstraint, QuadraticConstraint, QuadraticFlux
from nlbottleneck.presets import get_preset, min_speed_model, rational_speed_model

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def case_model():
    return min_speed_model()


@pytest.fixture(scope="session")
def rational_model():
    return rational_speed_model()


@pytest.fixture(scope="session")
def free_model():
    """Quadratic flux, speed capped at 0.3, no capacity drop."""
    return FluxModel(QuadraticFlux(), MinSpeed(0.3), NoConstraint())


@pytest.fixture(scope="session")
def quad_model_07():
    return FluxModel(QuadraticFlux(), MinSpeed(0.7), QuadraticConstraint(0.75))


@pytest.fixture(scope="session")
def small_case():
    def make(name="case1", cells=160, **changes):
        return get_preset(name).config(cells, **changes)
    return make


# one line per acceptance criterion, printed in the terminal summary
_CRITERIA: list[tuple[int, str]] = []


@pytest.fixture(scope="session")
def criterion_log():
    def log(number: int, passed: bool, text: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {text}"
        _CRITERIA.append((number, line))
        print(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
