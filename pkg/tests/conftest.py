import os

os.environ.setdefault('RN_CONFIG', 'testing')

from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from rnweights.algebra_core import PositiveElement, Weight, build_algebra, certify_pair  # noqa: E402

SCENARIOS = Path(__file__).resolve().parent.parent / 'scenarios'


@pytest.fixture
def m2():
    return build_algebra([2])


@pytest.fixture
def pt_phi(m2):
    """h = diag(1, 2)"""
    return Weight.from_density(m2.diag([[1.0, 2.0]]))


@pytest.fixture
def pt_pair(m2, pt_phi):
    """delta = diag(3, 1), lambda = 1"""
    delta = PositiveElement.from_element(m2.diag([[3.0, 1.0]]))
    return certify_pair(pt_phi, delta, PositiveElement.from_element(m2.identity()))


def random_positive(algebra, rng, spread=1.0):
    blocks = []
    for n in algebra.block_dims:
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        q, _ = np.linalg.qr(a)
        blocks.append((q * np.exp(rng.uniform(-spread, spread, n))) @ q.conj().T)
    return PositiveElement.from_element(algebra.element(blocks))


def random_element(algebra, rng):
    return algebra.element([rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
                            for n in algebra.block_dims])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def three_block():
    return build_algebra([2, 3, 4])


@pytest.fixture
def commuting_instance(three_block, rng):
    """phi with a delta built in the eigenbasis of its density (lambda = 1)"""
    phi = Weight(random_positive(three_block, rng))
    log_delta = phi.density.spectral_function(lambda w: np.sin(3 * w) + 0.2)
    delta = PositiveElement.from_log(log_delta)
    pair = certify_pair(phi, delta, PositiveElement.from_element(three_block.identity()))
    return phi, pair
