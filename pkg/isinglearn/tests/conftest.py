import numpy as np
import pytest


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: end-to-end reproductions taking minutes")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
