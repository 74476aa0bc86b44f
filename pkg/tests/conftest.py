import os

import numpy as np
import pytest

from bpcure.betaprime import BetaPrimeParams
from bpcure.cure import CureParams
from bpcure.fit import fit_ml
from bpcure.simulate import SimConfig, draw_sample


TRUE_S1 = CureParams(
    alpha=2.0,
    bp=BetaPrimeParams(mu=0.5, phi=1.0),
    beta=np.array([0.5, -1.0]),
)

# censor window calibrated once for the scenario-1 truth; unit tests only
# need plausible censoring, not the exact paper rate
S1_WINDOW = (0.01, 11.0)


def make_dataset(n: int, rep: int = 0, seed: int = 0):
    cfg = SimConfig(n=n, true_params=TRUE_S1, censor_window=S1_WINDOW, reps=1, seed=seed)
    return draw_sample(cfg, rep)


@pytest.fixture(scope="session")
def small_data():
    return make_dataset(120, rep=0, seed=11)


@pytest.fixture(scope="session")
def small_fit(small_data):
    return fit_ml(small_data, family="nbbp", seed=3)


@pytest.fixture(scope="session")
def melanoma_path():
    """Path to a user-supplied melanoma CSV, or None when absent."""
    path = os.environ.get("BPCURE_MELANOMA_CSV", "")
    if path and os.path.exists(path):
        return path
    fallback = os.path.join(os.path.dirname(__file__), "data", "e1690.csv")
    if os.path.exists(fallback):
        return fallback
    return None
