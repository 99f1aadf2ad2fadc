from __future__ import annotations

import numpy as np
import pytest

from emgedge.dataio import SynthConfig, synth_dataset
from emgedge.evaluation import SplitSpec, stratified_split_indices
from emgedge.features import feature_matrix
from emgedge.models import ForestConfig, train_forest

_CRITERIA: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA.setdefault(marker.args[0], []).append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcomes in _CRITERIA.items():
        if "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"{status:4s}  {name}  ({len(outcomes)} checks)")


@pytest.fixture(scope="session")
def synth():
    return synth_dataset(SynthConfig())


@pytest.fixture(scope="session")
def xy(synth):
    return feature_matrix(synth), synth.labels()


@pytest.fixture(scope="session")
def split(xy):
    return stratified_split_indices(xy[1], SplitSpec())


@pytest.fixture(scope="session")
def forest(xy, split):
    X, y = xy
    train, _ = split
    return train_forest(X[train], y[train], ForestConfig(n_trees=30))


@pytest.fixture
def rng():
    return np.random.default_rng(7)
