from pathlib import Path

import pytest

from vacantlot.synth import SynthConfig, generate_city_with_rule


def write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


# a compact city: cheap to build, still exercises every layer
SMALL = dict(n_lots=120, n_per_infrastructure_kind=4, n_crime=600, n_properties_per_year=300)


@pytest.fixture(scope="session")
def small_city():
    layers, rule, dataset = generate_city_with_rule(SynthConfig(name="smallville", seed=11, noise=0.05, **SMALL))
    return layers, rule, dataset


# criterion number -> (status, title, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{status} criterion {n}: {title}" + (f" ({detail})" if detail else ""))
