import itertools
from fractions import Fraction

import pytest

from noisyquerylab.boolfn import int_to_bits
from noisyquerylab.dist import FiniteDist
from noisyquerylab.stats import RngStream, random_rational_probs


@pytest.fixture
def rng():
    return RngStream(20240901, "tests")


def random_rational_bitdist(rng: RngStream, n_bits: int) -> FiniteDist:
    """Random exact distribution over {0,1}^n_bits."""
    probs = random_rational_probs(rng, 2**n_bits)
    return FiniteDist(
        {int_to_bits(v, n_bits): p for v, p in enumerate(probs) if p != 0}
    )


def random_float_bitdist(rng: RngStream, n_bits: int, alpha: float = 0.8) -> FiniteDist:
    outs = list(itertools.product((0, 1), repeat=n_bits))
    probs = rng.generator.dirichlet([alpha] * len(outs))
    return FiniteDist({o: p for o, p in zip(outs, probs)})
