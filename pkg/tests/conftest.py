import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "pmssm",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("pmssm")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    def log(line: str):
        ACCEPTANCE_LINES.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
