"""Simulation laboratory for randomized query complexity over noisy oracles."""

__version__ = "0.1.0"

from .boolfn import (
    OUTSIDE_PROMISE,
    ApproxIndexInput,
    PartialFn,
    approxindex,
    compose,
    function_zoo,
    gapmaj,
    make_approxindex_input,
    triv,
)
from .dist import FiniteDist, chi_sym_sq, hellinger_sq, js, tvd
from .noisy import CostLedger, NoisyOracle, amplified_bias, degrade, simulate_bias_via
from .osim import SimSession, single_bit_sim
from .stats import RngStream
