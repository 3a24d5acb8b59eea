import random

import pytest

from coalgame.partitions import Partition, PayoffVector
from coalgame.wardrop import QueueSystem, we_worths


def random_consistent_payoff(
    sys: QueueSystem, p: Partition, rng: random.Random, skew: float = 1.0
) -> PayoffVector:
    """Random payoff with per-coalition sums equal to the WE worths.

    skew > 1 produces lopsided splits (useful to expose blockable
    payoffs that near-uniform sampling would miss).
    """
    worths = we_worths(sys, p)
    shares = [0.0] * sys.n
    for c, worth in zip(p.coalitions, worths):
        weights = [rng.expovariate(1.0) ** skew for _ in c]
        total = sum(weights)
        for i, w in zip(c, weights):
            shares[i - 1] = worth * w / total
    return PayoffVector.of(shares)


@pytest.fixture
def rng():
    return random.Random(0xC0A1)
