import os
from contextlib import contextmanager

import numpy as np
import pytest

import rfdl.config


def pytest_addoption(parser: pytest.Parser, pluginmanager):
    parser.addoption(
        "--run-acceptance",
        action="store_true",
        default=False,
        help="Run the long acceptance reproductions.",
    )


def pytest_configure(config: pytest.Config):
    config.addinivalue_line(
        "markers", "acceptance: long running reproduction, needs --run-acceptance"
    )
    config.addinivalue_line(
        "markers", "integration_test: drives the command line interface"
    )
    config.addinivalue_line("markers", "prioritize: prioritize this test")


@pytest.hookimpl(tryfirst=True)  # pyright:ignore[reportUntypedFunctionDecorator]
def pytest_collection_modifyitems(session, config, items):
    items.sort(key=lambda i: 0 if i.get_closest_marker("prioritize") else 1)


def pytest_runtest_setup(item):
    if item.get_closest_marker("acceptance") and not item.config.getoption(
        "--run-acceptance"
    ):
        pytest.skip("acceptance test, use --run-acceptance to run")


@pytest.fixture(autouse=True)
def isolated_config(monkeypatch: pytest.MonkeyPatch, tmp_path):
    """Point the user configuration file into the temp folder."""
    config_file = os.path.join(tmp_path, "config", "config.yaml")
    monkeypatch.setattr(rfdl.config, "CONFIG_FILE", config_file)
    return config_file


@pytest.fixture
def test_name(request):
    yield request.node.name


@pytest.fixture(autouse=True)
def assertion_msg():
    @contextmanager
    def assertion_msg(msg: str):
        try:
            yield
        except AssertionError as e:
            e.args = (e.args[0] + "\n" + msg,)
            raise

    return assertion_msg


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def synthetic():
    """A small separable three class problem, 12 x 30."""
    from rfdl.data import synth_classes

    X, labels = synth_classes(3, 12, 10, separation=5.0, noise_sigma=0.3, seed=7)
    return X, labels
