import itertools
import math

import numpy as np
import pytest

from chaoslab import (
    Distribution,
    OrderedLaw,
    StateSpace,
    SymmetricLaw,
    enumerate_occupancies,
)


def random_distribution(space, rng):
    return Distribution(space, tuple(rng.dirichlet(np.ones(space.k))))


def random_symmetric_law(rng, n=None, k=None, max_n=6, max_k=3):
    """Random symmetric law via Dirichlet masses on the occupancy classes."""
    k = k or int(rng.integers(2, max_k + 1))
    n = n or int(rng.integers(2, max_n + 1))
    space = StateSpace.of_size(k)
    occs = enumerate_occupancies(space, n)
    masses = rng.dirichlet(np.ones(len(occs)))
    return SymmetricLaw(space, n, dict(zip(occs, masses)))


def dense_marginal_probs(dense: OrderedLaw, j: int) -> np.ndarray:
    """Brute-force marginal of the first j coordinates of a dense law."""
    k, n = dense.space.k, dense.n
    arr = dense.probs.reshape((k,) * n)
    return arr.sum(axis=tuple(range(j, n))).reshape(-1)


def dense_specific_loglik(dense: OrderedLaw) -> float:
    terms = [p * math.log(p) for p in dense.probs if p > 0.0]
    return math.fsum(terms) / dense.n


def ordered_probs_of_law(law: SymmetricLaw) -> dict:
    """Map ordered tuples to probabilities without going through to_dense."""
    from chaoslab.core import class_size, occupancy_of

    out = {}
    for s in itertools.product(range(law.space.k), repeat=law.n):
        m = occupancy_of(law.space, s)
        mass = law.mass(m)
        if mass:
            out[s] = mass / class_size(m)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
