import numpy as np
import pytest

from kernel_cblb.core import Dataset
from kernel_cblb.numerics import RngStream


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_ate():
    from kernel_cblb.dgp import generate_ate
    return generate_ate(RngStream(11), 300)


@pytest.fixture
def small_policy():
    from kernel_cblb.dgp import generate_policy
    return generate_policy(RngStream(12), 300)


class OutcomePlugin:
    """Contributions are the outcomes themselves: the bag mean estimator."""

    name = "outcome_mean"

    def __call__(self, bag, rng=None):
        return bag.outcomes.copy()


def outcomes_only(y):
    y = np.asarray(y, float)
    return Dataset(y, np.arange(y.size) % 2, np.zeros((y.size, 1)))


# one summary line per acceptance criterion, collected from @pytest.mark.criterion(n)
_CRITERIA: dict[int, list[tuple[str, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marks = [m.args[0] for m in item.iter_markers("criterion")]
    if not marks:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        for number in marks:
            _CRITERIA.setdefault(number, []).append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        results = _CRITERIA[number]
        verdict = "PASS" if all(o == "passed" for _, o in results) else "FAIL"
        names = ", ".join(name for name, _ in results)
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {names}")
