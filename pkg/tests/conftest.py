import pytest

from whykit.registry import default_registry
from whykit.schema import pima_csv_path, pima_schema
from whykit.tabular import DEFAULT_TRAIN_CONFIG, load_dataset, train


@pytest.fixture(scope="session")
def schema():
    return pima_schema()


@pytest.fixture(scope="session")
def dataset(schema):
    return load_dataset(pima_csv_path(), schema)


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def logistic_model(dataset):
    return train(dataset, "logistic", DEFAULT_TRAIN_CONFIG)


@pytest.fixture(scope="session")
def tree_model(dataset):
    return train(dataset, "tree", DEFAULT_TRAIN_CONFIG)


@pytest.fixture(scope="session")
def forest_model(dataset):
    return train(dataset, "forest", DEFAULT_TRAIN_CONFIG)
