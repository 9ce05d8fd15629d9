import itertools
import random

import pytest

from treelearn.tree_core import TrainingSet


def all_training_sets(nodes, max_examples):
    """Every labelled example set over ``nodes`` with at most ``max_examples`` entries."""
    nodes = list(nodes)
    for k in range(max_examples + 1):
        for chosen in itertools.combinations(nodes, k):
            for pol in itertools.product("+-", repeat=k):
                yield TrainingSet.of(zip(chosen, pol))


def random_training(rng, n, k):
    return TrainingSet.of((u, rng.choice("+-")) for u in rng.sample(range(n), min(k, n)))


@pytest.fixture
def rng():
    return random.Random(20240611)


# -- acceptance summary ------------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = str(rep.longrepr).strip().splitlines()[-1][:160]
    ACCEPTANCE[mark.args[0]] = (mark.args[1], "PASS" if rep.passed else "FAIL",
                                f"{detail} [{rep.duration:.1f}s]")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} {status}: {title}: {detail}")
