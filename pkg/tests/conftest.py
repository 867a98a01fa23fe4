import numpy as np
import pytest

from fairsearch.data.dataset import synthetic_dataset
from fairsearch.supernet.config import SupernetConfig
from fairsearch.tensor import precision


@pytest.fixture(autouse=True)
def float64():
    with precision("float64"):
        yield


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


@pytest.fixture()
def tiny_cfg():
    return SupernetConfig(
        num_cells=1,
        init_channels=2,
        num_classes=2,
        image_size=4,
        embedding_dim=4,
    )


@pytest.fixture()
def small_cfg():
    return SupernetConfig(
        num_cells=3,
        init_channels=2,
        num_classes=3,
        image_size=8,
        embedding_dim=4,
    )


@pytest.fixture()
def tiny_dataset():
    return synthetic_dataset(
        num_classes=2, per_class=12, image_size=4, seed=3, noise=8.0
    )
