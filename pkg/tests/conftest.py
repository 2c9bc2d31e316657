import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture(scope="session")
def split0():
    from blocktalk.datagen import make_split

    return make_split(seed=0)


@pytest.fixture(scope="session")
def tiny_data(split0):
    from blocktalk.datagen import generate

    return generate(split0, counts={"train": 1500, "val": 200, "test": 200})


@pytest.fixture(scope="session")
def tiny_model(tiny_data):
    """A small but competent checkpoint shared across test modules."""
    from blocktalk.offline import TrainConfig, train

    config = TrainConfig(encoder="lstm", decoder="conv", hidden=32,
                         batch_size=32, max_epochs=30, lr=3e-3,
                         patience=8, seed=11)
    model, _ = train(config, tiny_data["train"].examples,
                     tiny_data["val"].examples)
    return model
