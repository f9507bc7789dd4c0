import numpy as np
import pytest

from dml_ensemble import AttributionConfig, DmlConfig, GbrtConfig, MlpConfig, train_dml
from dml_ensemble.numkit import SplitSpec, train_test_split
from dml_ensemble.synth import make_synthetic

ACCEPTANCE_LINES = []


def small_config(seed=3, **kw):
    """A configuration that trains in well under a second."""
    base = dict(
        gbrt=GbrtConfig(n_estimators=20, max_depth=3, seed=seed),
        mlp=MlpConfig(hidden_sizes=(16, 8), epochs=20, seed=seed),
        gate_hidden=(16, 8),
        gate_epochs=20,
        mc_samples=10,
        attribution=AttributionConfig(steps=10),
        seed=seed,
    )
    base.update(kw)
    return DmlConfig(**base)


@pytest.fixture(scope="session")
def small_data():
    return make_synthetic("two-regime", 300, 0.1, seed=11)


@pytest.fixture(scope="session")
def small_split(small_data):
    return train_test_split(small_data, SplitSpec(0.8, 5))


@pytest.fixture(scope="session")
def small_model(small_split):
    return train_dml(small_split[0], small_config())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
