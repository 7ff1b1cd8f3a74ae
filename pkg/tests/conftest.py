import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo checks at acceptance scale")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240611)


@pytest.fixture
def node_state():
    """Minimal state for calling an experiment node directly."""

    def build(experiment: str, seed: int = 11, **params) -> dict:
        from utils.config_file import ExperimentConfig

        cfg = ExperimentConfig(experiment=experiment, seed=seed, threads=2, params=params)
        return {"params": cfg.resolved_params(), "seed": seed, "threads": 2}

    return build
