import json
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by test_acceptance, printed at the end of the run
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def pinned():
    return json.loads((HERE / "fixtures" / "acceptance.json").read_text())


@pytest.fixture(scope="session")
def grid2_33():
    from fracperim.generators import grid

    return grid(2, 33)


@pytest.fixture(scope="session")
def grid1_129():
    from fracperim.generators import grid

    return grid(1, 129)


@pytest.fixture(scope="session")
def poincare_sweeps(grid2_33):
    """Default-family Poincare sweeps on grid(2, 33), rescaled and not; they share cached terms."""
    from fracperim.inequalities import sweep

    thetas = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    return sweep(grid2_33, "bbm_poincare", thetas), sweep(grid2_33, "bbm_poincare", thetas, rescale=False)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, line = ACCEPTANCE[number]
        terminalreporter.write_line(f"{status} criterion {number:2d}: {line}")
