import time

import numpy as np
import pytest

from advmask.datasets import make_textured_dataset
from advmask.model import build_model, train

# accounting shared with the acceptance suite
TIMINGS = {}


@pytest.fixture(scope="session")
def train_data():
    return make_textured_dataset(260, seed=101)


@pytest.fixture(scope="session")
def test_data():
    return make_textured_dataset(40, seed=202)


@pytest.fixture(scope="session")
def reference_model(train_data, test_data):
    """The trained reference CNN shared by attack and acceptance tests."""
    t0 = time.monotonic()
    model = train(
        build_model((28, 28, 1), 10, seed=7),
        train_data,
        epochs=6,
        learning_rate=0.08,
        seed=11,
        batch_size=64,
        test_dataset=test_data,
    )
    TIMINGS["train_seconds"] = time.monotonic() - t0
    return model


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when != "call":
        return
    if "test_acceptance.py::test_criterion_" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else "FAIL"
        print(f"\n[{status}] {name}")
