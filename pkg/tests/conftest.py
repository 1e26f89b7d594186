import random

import pytest

from app.workbench.generators import generate


@pytest.fixture
def no_pure_market():
    return generate("no-pure").market


@pytest.fixture
def tip_bad_market():
    return generate("tip-bad").market


@pytest.fixture
def clearing_market():
    return generate("market-clearing", {"kappa": 3}).market


@pytest.fixture
def chain5():
    return generate("chain", {"n": 5}).market


@pytest.fixture
def rng():
    return random.Random(20240601)
