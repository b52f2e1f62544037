import numpy as np
import pytest

from whff import model as model_mod
from whff import thermal as thermal_mod


@pytest.fixture(scope="session")
def small_spec():
    return model_mod.ModelSpec(grid_rows=16, grid_cols=16, S=128, K=48, M=6,
                               seed=11, n_fields=2)


@pytest.fixture(scope="session")
def small_model(small_spec):
    return model_mod.generate_model(small_spec)


@pytest.fixture(scope="session")
def small_schedule():
    return model_mod.build_scan_schedule("fast", 2, t_l=8, t_d=4,
                                         budget_ms=50.0)


@pytest.fixture(scope="session")
def small_heatload(small_model):
    return thermal_mod.synthetic_heatload(small_model, seed=5)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
