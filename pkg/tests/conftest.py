import numpy as np
import pytest

import tastenet as tn
from tastenet import synthetic as syn


@pytest.fixture(scope="session")
def small_splits():
    cfg = tn.GenConfig(n_train=2000, n_dev=500, n_test=500, seed=7)
    return tn.generate_dataset(cfg)


@pytest.fixture(scope="session")
def truth_model():
    return tn.FittedModel(utility=syn.utility_true(), beta_mnl=syn.truth_beta_mnl())


@pytest.fixture(scope="session")
def quick_cfg():
    return tn.TrainConfig(seed=5, restarts=1, max_epochs=40, patience=8)


@pytest.fixture(scope="session")
def small_tastenet(small_splits, quick_cfg):
    train_ds, dev_ds, _ = small_splits
    net = tn.MlpSpec(input_dim=3, hidden_sizes=(7,), activations=("relu",),
                     transforms=("neg_relu",))
    return tn.train(tn.ModelSpec(syn.utility_tastenet(), net), train_ds, dev_ds, quick_cfg)


def toy_schema():
    """Three alternatives, one attribute each, car availability varies."""
    return tn.FeatureSchema(
        characteristics=("age", "member"),
        alternatives=("bus", "car", "walk"),
        attributes={"bus": (("cost", "bus_cost"),), "car": (("cost", "car_cost"),),
                    "walk": (("cost", "walk_cost"),)},
        availability={"car": "car_av"},
        choice_column="choice",
    )


def toy_columns(n=4, seed=0):
    rng = np.random.default_rng(seed)
    return {
        "age": rng.integers(20, 60, n).astype(float),
        "member": rng.integers(0, 2, n).astype(float),
        "bus_cost": rng.uniform(1, 5, n).round(2),
        "car_cost": rng.uniform(2, 9, n).round(2),
        "walk_cost": np.zeros(n),
        "car_av": np.ones(n),
        "choice": np.zeros(n),
    }
