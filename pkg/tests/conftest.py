import numpy as np
import pytest

from amfcc import charting, simgen
from amfcc.basis import make_basis


@pytest.fixture(scope="session")
def basis20():
    return make_basis(0.0, 1.0, 20)


@pytest.fixture(scope="session")
def small_chart(basis20):
    """A fitted chart on Scenario 1 data, small enough for unit tests."""
    spec = simgen.ScenarioSpec(seed=11)
    train = simgen.generate(spec, 120, id_prefix="tr")
    tune = simgen.generate(spec.with_(seed=12), 150, id_prefix="tu")
    chart = charting.fit_chart(basis20, train, tune)
    return chart, train, tune


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid or rep.when not in ("call", "setup"):
                continue
            if rep.when == "setup" and outcome == "passed":
                continue
            name = nodeid.split("::")[-1].replace("test_criterion_", "")
            num, _, label = name.partition("_")
            detail = dict(rep.user_properties).get("verdict", "")
            lines.append((int(num), f"criterion {num} ({label.replace('_', ' ')}): "
                                    f"{'PASS' if outcome == 'passed' else 'FAIL'}  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
