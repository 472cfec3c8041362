import pytest

from model.reference import ref2, ref3, ref3b, two_rate
from symbolic.budget import enumeration_budget


@pytest.fixture(autouse=True)
def fresh_budget():
    enumeration_budget.reset()
    yield
    enumeration_budget.reset()


@pytest.fixture(scope="session")
def REF3():
    return ref3()


@pytest.fixture(scope="session")
def REF3b():
    return ref3b()


@pytest.fixture(scope="session")
def REF2():
    return ref2()


@pytest.fixture(scope="session")
def TWO_RATE():
    return two_rate()


@pytest.fixture
def small_config():
    """A REF3 experiment small enough for every stage to run in seconds"""
    return {
        "model": {"preset": "REF3"},
        "scales": {"rho": 2.0 ** -6, "rho_ladder": [2.0 ** -6], "k": 2},
        "dimension": {"eps": 1e-9, "n_max": 6, "continuity_deltas": []},
        "marstrand": {"t_samples": 2, "leaf_samples": 200, "transversality_pairs": 5},
        "monte_carlo": {"trials": 5, "max_leaf_blocks": 2},
        "geometry": {
            "max_len": 1,
            "grid_cells": 4,
            "robustness_deltas": [0.0],
            "curves": 3,
            "max_depth": 4,
            "resolutions": [2.0 ** -6, 2.0 ** -7],
        },
        "seed": 11,
    }
