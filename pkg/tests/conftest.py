"""Session-scoped fixtures: perturbation bundles are expensive to build."""

import numpy as np
import pytest

from sinelab.perturb import build_approx_measure
from sinelab.testfn import make_bump


@pytest.fixture(scope="session")
def bundle_400_20():
    return build_approx_measure(400.0, 20.0, make_bump().rescaled(20.0), relaxed=True)


@pytest.fixture(scope="session")
def bundle_400_10():
    return build_approx_measure(400.0, 10.0, make_bump().rescaled(10.0), relaxed=True)


@pytest.fixture(scope="session")
def bundle_800_10():
    return build_approx_measure(800.0, 10.0, make_bump().rescaled(10.0), relaxed=True)


@pytest.fixture(scope="session")
def bundle_2000_10():
    return build_approx_measure(2000.0, 10.0, make_bump().rescaled(10.0), relaxed=True)


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)
    return make
