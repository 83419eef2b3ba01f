import random

import pytest

from faskit.algebra import GroupParams, get_group


class ScriptedRng:
    """Feeds predetermined values into code expecting a random source."""

    def __init__(self, values):
        self.values = list(values)

    def randrange(self, *args):
        return self.values.pop(0)

    def getrandbits(self, _bits):
        return self.values.pop(0)


def stub_challenge(value):
    """A challenge function returning a fixed scalar (KAT hash stub)."""
    def fn(R, y, message, group):
        return value
    return fn


@pytest.fixture
def kat_group():
    return get_group("kat")


@pytest.fixture
def sim_group():
    return get_group("sim")


@pytest.fixture
def q17_group():
    # q=17 companion group for the hand-worked Shamir example:
    # p = 6*17 + 1 = 103 prime, g = 2^6 mod 103 generates the order-17
    # subgroup (2^102 = 1 by Fermat).
    return GroupParams(p=103, q=17, g=64)


@pytest.fixture
def rng():
    return random.Random(0xFA5)
