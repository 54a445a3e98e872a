"""Noisy-oracle cost model and bias-manipulation primitives.

A noisy oracle hides a bit vector; querying index i with parameter gamma
returns the hidden bit with probability (1+gamma)/2 and charges gamma^2 to
the ledger.  Majority-vote amplification, noise-adding degradation, and the
two-parameter bias compiler live here; biases stay exact rationals wherever
they feed later exact computation and are converted to floats only at the
moment of sampling.
"""

from __future__ import annotations

import csv
import io
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

try:
    from gmpy2 import mpq as _mpq
except ImportError:  # pragma: no cover
    _mpq = Fraction

Rational = Union[Fraction, int]


def to_fraction(x) -> Fraction:
    """Normalize any rational-like (Fraction, int, gmpy2.mpq, float) to a
    Fraction with plain-int internals."""
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(int(x.numerator), int(x.denominator))


def _as_mpq(x):
    if isinstance(x, float):
        x = Fraction(x)
    return _mpq(int(x.numerator), int(x.denominator))


class CostLedger:
    """Accumulates gamma^2 per call, optionally with a full call log."""

    def __init__(self, log_calls: bool = False):
        self.per_index: dict[int, object] = {}
        self.total = 0
        self.calls: Optional[list[tuple[int, object, int]]] = [] if log_calls else None

    def charge(self, index: int, gamma, answer: int) -> None:
        c = gamma * gamma
        self.per_index[index] = self.per_index.get(index, 0) + c
        self.total = self.total + c
        if self.calls is not None:
            self.calls.append((index, gamma, answer))

    def total_float(self) -> float:
        return float(self.total)


class NoisyOracle:
    """Oracle over a hidden bit vector (dense tuple or lazy object with
    .bit(i)); every call is independent."""

    def __init__(self, hidden, rng, log_calls: bool = False):
        self.hidden = hidden
        self.rng = rng
        self.ledger = CostLedger(log_calls=log_calls)

    def _hidden_bit(self, i: int) -> int:
        if hasattr(self.hidden, "bit"):
            return self.hidden.bit(i)
        return self.hidden[i]

    def query(self, i: int, gamma) -> int:
        """One noisy call: correct with probability exactly (1+gamma)/2."""
        if not 0 <= gamma <= 1:
            raise ValueError(f"gamma {gamma} outside [0, 1]")
        b = self._hidden_bit(i)
        answer = b if self.rng.random() < (1 + float(gamma)) / 2 else 1 - b
        self.ledger.charge(i, gamma, answer)
        return answer


class BitOracle:
    """A single-bit view of a NoisyOracle, fixed to one index."""

    def __init__(self, oracle: NoisyOracle, index: int):
        self.oracle = oracle
        self.index = index

    def query(self, gamma) -> int:
        return self.oracle.query(self.index, gamma)


# ---------------------------------------------------------------------------
# Majority-vote amplification
# ---------------------------------------------------------------------------


def majority_bias_sweep(gamma, k_max: Optional[int] = None) -> Iterator[tuple[int, object]]:
    """Yield (k, bias of the k-wise majority of Bernoulli((1+gamma)/2) bits)
    for odd k = 1, 3, 5, ... as exact rationals.

    Uses the O(1)-per-step recurrence
        bias(k+2) = bias(k) + 2 C(k,(k+1)/2) (pq)^((k+1)/2) (p - q),
    which keeps sweeps to k ~ 1e4 cheap even in exact arithmetic.
    """
    g = _as_mpq(gamma)
    pq = (1 - g * g) / 4
    bias = g
    coeff = _mpq(1)
    pq_pow = pq
    k = 1
    while k_max is None or k <= k_max:
        yield k, bias
        bias = bias + 2 * coeff * pq_pow * g
        k += 2
        coeff = coeff * 4 * k / (k + 1)
        pq_pow = pq_pow * pq


def amplified_bias(gamma, k: int) -> Fraction:
    """Exact bias of the majority vote of k independent bias-gamma bits.

    Preconditions (the amplification regime): |gamma| <= 1/3, k odd, and
    k <= 1/gamma^2; the result gamma' then satisfies
    (1/3) sqrt(k) |gamma| <= |gamma'| <= 3 sqrt(k) |gamma|.
    """
    g = Fraction(gamma)
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be a positive odd integer")
    if abs(g) > Fraction(1, 3):
        raise ValueError("|gamma| must be <= 1/3")
    if g != 0 and k > 1 / (g * g):
        raise ValueError("k must be <= 1/gamma^2")
    if g < 0:
        return -amplified_bias(-g, k)
    for kk, bias in majority_bias_sweep(g, k):
        if kk == k:
            return to_fraction(bias)
    raise AssertionError("unreachable")


def amplify_bounds_ok(gamma, k: int, bias) -> bool:
    """Exact check of (1/3) sqrt(k) g <= bias <= 3 sqrt(k) g for g > 0,
    via squared comparisons (no irrational arithmetic)."""
    g = _as_mpq(gamma)
    b = _as_mpq(bias)
    lower_ok = 9 * b * b >= k * g * g
    upper_ok = b * b <= 9 * k * g * g
    return bool(lower_ok and upper_ok)


# ---------------------------------------------------------------------------
# Degrading a known bias down to a target
# ---------------------------------------------------------------------------


def degrade_flip_prob(gamma_hi, gamma_lo):
    """Flip probability that turns a bias gamma_hi bit into bias gamma_lo:
    a bit flipped with probability f has bias gamma_hi * (1 - 2f)."""
    hi, lo = Fraction(gamma_hi), Fraction(gamma_lo)
    if not 0 < lo <= hi:
        raise ValueError("need 0 < gamma_lo <= gamma_hi")
    return (1 - lo / hi) / 2


def degrade(bit: int, gamma_hi, gamma_lo, rng) -> int:
    f = degrade_flip_prob(gamma_hi, gamma_lo)
    if rng.random() < float(f):
        return 1 - bit
    return bit


# ---------------------------------------------------------------------------
# Two-parameter bias compiler
# ---------------------------------------------------------------------------


def smallest_amplifying_k(gamma_base, gamma_target) -> tuple[int, Fraction]:
    """Smallest odd k whose majority amplifies gamma_base to at least
    gamma_target, with the exact achieved bias."""
    base, target = Fraction(gamma_base), Fraction(gamma_target)
    if not 0 < base <= target:
        raise ValueError("need 0 < gamma_base <= gamma_target")
    for k, bias in majority_bias_sweep(base):
        if bias >= target:
            return k, to_fraction(bias)
        if base != 0 and k > 1 / (base * base) + 2:
            raise ArithmeticError(
                "amplification exceeded its guaranteed regime"
            )  # unreachable for target <= 1/3
    raise AssertionError("unreachable")


def simulate_bias_via(oracle: NoisyOracle, i: int, gamma_target, gamma_base, rng) -> int:
    """Return a bit of exact bias gamma_target toward the hidden bit, built
    from base-parameter calls.

    For gamma_target <= 1/3: majority-amplify the smallest odd number of
    gamma_base calls whose exact amplified bias reaches the target, then
    degrade back down to exactly the target (the ledger is charged
    k * gamma_base^2 by the underlying calls).  For gamma_target > 1/3: one
    full gamma = 1 call, degraded to the target.
    """
    target = Fraction(gamma_target)
    base = Fraction(gamma_base)
    if target > Fraction(1, 3):
        bit = oracle.query(i, 1)
        if target == 1:
            return bit
        return degrade(bit, Fraction(1), target, rng)
    if not 0 < base <= target:
        raise ValueError("need 0 < gamma_base <= gamma_target <= 1/3")
    if base == target:
        return oracle.query(i, base)
    k, achieved = smallest_amplifying_k(base, target)
    votes = sum(oracle.query(i, base) for _ in range(k))
    bit = int(2 * votes > k)
    if achieved == target:
        return bit
    return degrade(bit, achieved, target, rng)


# ---------------------------------------------------------------------------
# Call-log export
# ---------------------------------------------------------------------------


def call_log_csv(trials: Sequence[tuple[int, CostLedger]]) -> str:
    """Render (trial_id, ledger) pairs as CSV rows
    trial_id,index,gamma,answer,cumulative_cost."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["trial_id", "index", "gamma", "answer", "cumulative_cost"])
    for trial_id, ledger in trials:
        if ledger.calls is None:
            raise ValueError("ledger was created without log_calls=True")
        cum = 0.0
        for index, gamma, answer in ledger.calls:
            cum += float(gamma) ** 2
            writer.writerow([trial_id, index, repr(float(gamma)), answer, repr(cum)])
    return buf.getvalue()
