from pathlib import Path

import pytest

from diffreason.cli import bundle_dir
from diffreason.embeddings import load_toy_lexicon

ROOT = Path(__file__).resolve().parents[1]
BUNDLES = ("one_rule", "two_rules", "election")

_criteria: list[tuple[str, str, float]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _criteria.append((marker.args[0], "PASS" if rep.passed else "FAIL", rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, duration in _criteria:
        terminalreporter.write_line(f"{status}  {name}  ({duration:.1f} s)")


@pytest.fixture(scope="session")
def lexicon():
    return load_toy_lexicon()


@pytest.fixture(scope="session")
def bundles():
    return {name: bundle_dir(name) for name in BUNDLES}

