import numpy as np
import pytest

from flagbundle.kernel_space import hardy_space, power_space
from flagbundle.op_model import assemble_flag


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def chain_flag(lams, psis, N=128, condition_a=None):
    """Flag operator over power spaces with polynomial couplings."""
    return assemble_flag([power_space(l, N) for l in lams], list(psis), condition_a)


def hardy_pair(psi, N=128):
    return assemble_flag([hardy_space(N), hardy_space(N)], [psi])
