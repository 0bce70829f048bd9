import pytest
from hypothesis import HealthCheck, settings

from platoonzk import backend

settings.register_profile(
    "default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

BACKENDS = backend.available()
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=BACKENDS)
def any_backend(request):
    with backend.use(request.param):
        yield request.param


@pytest.fixture
def native_only():
    if "native" not in BACKENDS:
        pytest.skip("compiled backend not built")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
