import pytest

from coevo.genomes import GeneEffectTable, MeasureInterval, PolicyEffectSpec
from coevo.storage import load_default_config, load_default_effects

_CRITERION_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Collects one verdict line per acceptance criterion for the summary."""

    def report(line: str) -> None:
        line = line.lstrip("\n")
        _CRITERION_LINES.append(line)
        print("\n" + line)

    return report


def _criterion_number(line: str) -> int:
    digits = "".join(c for c in line.split(":", 1)[0] if c.isdigit())
    return int(digits) if digits else 0


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERION_LINES, key=_criterion_number):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_config():
    return load_default_config()


@pytest.fixture(scope="session")
def default_effects():
    return load_default_effects()


@pytest.fixture
def dyadic_effects():
    """Gene effects that are exact binary fractions, so rate sums carry no
    float noise and hand-computed oracles compare with ==."""
    return GeneEffectTable((0.5, -0.25, 0.125, 0.0625))


@pytest.fixture
def tiny_measure_spec():
    return PolicyEffectSpec(
        (
            MeasureInterval("close_everything", 0.20, 0.20),
            MeasureInterval("half_measure", 0.10, 0.10),
            MeasureInterval("token_gesture", 0.05, 0.05),
            MeasureInterval("does_nothing", 0.0, 0.0),
        )
    )
