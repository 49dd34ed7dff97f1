import itertools

import numpy as np
import pytest

import jackvar as jv

RAD = jv.DiscreteDistribution.rademacher()

# shared tolerance for exact identities, relative to max(1, E S^2)
IDENT_TOL = 1e-9


@pytest.fixture
def rad2():
    return jv.build_space([RAD, RAD])


@pytest.fixture
def rad3():
    return jv.build_space([RAD, RAD, RAD])


@pytest.fixture
def prod_stat():
    # S = x1 * x2
    return jv.Statistic.polynomial([(1.0, (1, 1))])


@pytest.fixture
def sum_stat():
    return jv.Statistic.linear([1.0, 1.0])


@pytest.fixture
def u2_stat():
    # S = x1 x2 + x1 x3 + x2 x3
    return jv.Statistic.pair_interaction({-1.0: -1.0, 1.0: 1.0})


@pytest.fixture
def prod_cache(rad2, prod_stat):
    return jv.CondExpCache(jv.tabulate(prod_stat, rad2))


@pytest.fixture
def sum_cache(rad2, sum_stat):
    return jv.CondExpCache(jv.tabulate(sum_stat, rad2))


@pytest.fixture
def u2_cache(rad3, u2_stat):
    return jv.CondExpCache(jv.tabulate(u2_stat, rad3))


def random_iid_space(rng, n, support_size=None):
    m = int(support_size or rng.integers(2, 4))
    support = rng.uniform(-1.0, 1.0, m)
    w = rng.random(m)
    w = w / w.sum()
    probs = 0.05 + (1.0 - 0.05 * m) * w
    d = jv.DiscreteDistribution(support, probs)
    return jv.build_space([d] * n)


def symmetric_table_statistic(space, rng):
    """Random exactly permutation-invariant table statistic on an iid space.

    Values are dyadic rationals k/64, so the per-entry orbit sums are exact
    and the symmetrized table is invariant to the last bit.
    """
    vals = rng.integers(-64, 65, size=space.shape).astype(np.float64) / 64.0
    stack = np.stack(
        [np.transpose(vals, perm) for perm in itertools.permutations(range(space.n))]
    )
    sym = stack.sum(axis=0) / stack.shape[0]
    return jv.Statistic.table(sym.ravel(order="F"))
