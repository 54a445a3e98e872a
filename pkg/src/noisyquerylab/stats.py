"""Shared statistical machinery: seeded RNG streams, exact combinatorics,
confidence intervals, goodness-of-fit tests, and Wald-equation checks.

Everything here is either exact rational arithmetic (Fraction / gmpy2.mpq)
or plain float statistics; no module-level state.
"""

from __future__ import annotations

import hashlib
import math
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.stats import chi2 as _chi2

try:
    from gmpy2 import mpq as _mpq

    _HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - gmpy2 is normally installed
    _mpq = Fraction
    _HAVE_GMPY2 = False


# ---------------------------------------------------------------------------
# RNG streams
# ---------------------------------------------------------------------------


def _path_to_ints(path: Sequence) -> tuple[int, ...]:
    """Map a stream path (ints / strings) to a stable tuple of uint32 words."""
    words: list[int] = []
    for part in path:
        if isinstance(part, (int, np.integer)):
            if part < 0:
                raise ValueError(f"negative path element {part}")
            words.append(int(part) & 0xFFFFFFFF)
            words.append((int(part) >> 32) & 0xFFFFFFFF)
        else:
            digest = hashlib.sha256(str(part).encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:4], "little"))
            words.append(int.from_bytes(digest[4:8], "little"))
    return tuple(words)


class RngStream:
    """A splittable, counter-based random stream.

    Streams are addressed by (root seed, path); identical addresses replay the
    identical bit sequence, distinct paths give statistically independent
    streams.  Backed by numpy's Philox counter generator, so results never
    depend on how trials are scheduled across workers.
    """

    def __init__(self, seed: int, *path):
        self.seed = int(seed)
        self.path = tuple(path)
        ss = np.random.SeedSequence(self.seed, spawn_key=_path_to_ints(self.path))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, *extra) -> "RngStream":
        return RngStream(self.seed, *(self.path + tuple(extra)))

    # Thin pass-throughs used throughout the package.
    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def choice(self, a, size=None, replace=True):
        return self.generator.choice(a, size=size, replace=replace)

    def permutation(self, x):
        return self.generator.permutation(x)

    def bernoulli(self, p: float) -> int:
        return int(self.generator.random() < p)


# ---------------------------------------------------------------------------
# Exact combinatorics
# ---------------------------------------------------------------------------


def binom_pmf_exact(k: int, i: int, p: Fraction) -> Fraction:
    """Pr[Binomial(k, p) = i] as an exact rational."""
    if not 0 <= i <= k:
        return Fraction(0)
    p = Fraction(p)
    return math.comb(k, i) * p**i * (1 - p) ** (k - i)


def binom_tail_exact(k: int, threshold: int, p: Fraction) -> Fraction:
    """Pr[Binomial(k, p) >= threshold], exact."""
    p = Fraction(p)
    lo = max(threshold, 0)
    return sum(
        (binom_pmf_exact(k, i, p) for i in range(lo, k + 1)), start=Fraction(0)
    )


def hypergeom_pmf_exact(m: int, big_k: int, d: int, w: int) -> Fraction:
    """Pr[W = w] for W = ones among d draws without replacement from a
    length-m population containing big_k ones."""
    if not (0 <= w <= d and w <= big_k and d - w <= m - big_k):
        return Fraction(0)
    return Fraction(math.comb(big_k, w) * math.comb(m - big_k, d - w), math.comb(m, d))


def hypergeom_tail(m: int, big_k: int, d: int, threshold: int) -> Fraction:
    """Pr[W >= threshold] under the hypergeometric law above, exact."""
    lo = max(threshold, 0)
    return sum(
        (hypergeom_pmf_exact(m, big_k, d, w) for w in range(lo, d + 1)),
        start=Fraction(0),
    )


def mad_binomial(k: int) -> Fraction:
    """Mean absolute deviation of Binomial(k, 1/2) for odd k, exact.

    Closed form: 2^-k * ((k+1)/2) * C(k, (k-1)/2).  Satisfies
    sqrt(k/2pi) <= M_k <= sqrt(k/2pi) * (1 + 1/k); see mad_binomial_bounds_ok.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be a positive odd integer")
    return Fraction((k + 1) // 2 * math.comb(k, (k - 1) // 2), 2**k)


def mad_binomial_bruteforce(k: int) -> Fraction:
    """E|Bin(k,1/2) - k/2| by direct expectation; cross-check for the closed form."""
    return sum(
        (
            Fraction(math.comb(k, i), 2**k) * abs(Fraction(i) - Fraction(k, 2))
            for i in range(k + 1)
        ),
        start=Fraction(0),
    )


def mad_binomial_sweep(k_max: int) -> Iterator[tuple[int, Fraction]]:
    """Yield (k, M_k) for odd k <= k_max via the exact recurrence
    M_{k+2} = M_k * (k+2)/(k+1), seeded at M_1 = 1/2."""
    m = _mpq(1, 2)
    k = 1
    while k <= k_max:
        yield k, m
        m = m * (k + 2) / (k + 1)
        k += 2


def mad_binomial_bounds_ok(k: int, m_k, pi_hi_digits: int = 60) -> bool:
    """Check sqrt(k/2pi) <= M_k <= sqrt(k/2pi)(1+1/k) by comparing exact
    rationals against pi at high precision (margins are Theta(1/k), far above
    the precision floor)."""
    import mpmath

    with mpmath.workdps(pi_hi_digits):
        pi = mpmath.pi
        m2 = mpmath.mpf(int(_num(m_k))) / mpmath.mpf(int(_den(m_k)))
        m2 = m2 * m2
        lower_ok = mpmath.mpf(k) / (2 * m2) <= pi
        upper_ok = mpmath.mpf(k) * (1 + mpmath.mpf(1) / k) ** 2 / (2 * m2) >= pi
    return bool(lower_ok and upper_ok)


def _num(q) -> int:
    return q.numerator


def _den(q) -> int:
    return q.denominator


# ---------------------------------------------------------------------------
# Confidence intervals and goodness of fit
# ---------------------------------------------------------------------------

_Z_TABLE = {0.90: 1.6448536269514722, 0.95: 1.959963984540054, 0.99: 2.5758293035489004}


def _z_for(level: float) -> float:
    if level in _Z_TABLE:
        return _Z_TABLE[level]
    from scipy.stats import norm

    return float(norm.ppf(0.5 + level / 2.0))


def wilson_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    z = _z_for(level)
    n = float(trials)
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return (lo, hi)


def chi_square_gof(observed: Sequence[float], expected: Sequence[float]) -> float:
    """Pearson chi-square p-value for observed counts against expected counts.

    Requires every expected cell count >= 5 (classic rule of thumb); the
    degrees of freedom are len(cells) - 1.
    """
    obs = np.asarray(observed, dtype=float)
    exp = np.asarray(expected, dtype=float)
    if obs.shape != exp.shape or obs.ndim != 1:
        raise ValueError("observed and expected must be 1-d and same length")
    if np.any(exp < 5.0):
        raise ValueError("expected cell counts must all be >= 5")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    df = len(obs) - 1
    return float(_chi2.sf(stat, df))


# ---------------------------------------------------------------------------
# Wald's equation check
# ---------------------------------------------------------------------------


def wald_check(
    segment_sampler: Callable[[RngStream], float],
    stop_rule: Callable[[Sequence[float], float], bool],
    trials: int,
    rng: RngStream,
    calibration_draws: int = 20000,
) -> tuple[float, float, float, float]:
    """Empirically test Wald's equation E[sum_{l<=L} X_l] = E[L] * E[X].

    stop_rule(past, upcoming) is consulted before each new segment is
    consumed; returning True stops with sum(past).  A legitimate stopping
    rule ignores `upcoming` (it may only look at the past); a rule that peeks
    at `upcoming` violates the equation and is flagged by the caller.

    Returns (lhs, rhs, ratio, ci_width) where lhs is the mean stopped sum,
    rhs = mean(L) * E_hat[X] with E_hat from an independent calibration
    sample, and ci_width is the relative 95% half-width of the ratio.
    """
    cal = rng.child("wald-cal")
    x_mean = float(np.mean([segment_sampler(cal) for _ in range(calibration_draws)]))

    sums = np.empty(trials)
    lengths = np.empty(trials)
    for trial in range(trials):
        r = rng.child("wald", trial)
        past: list[float] = []
        while True:
            upcoming = segment_sampler(r)
            if stop_rule(past, upcoming):
                break
            past.append(upcoming)
            if len(past) > 10**6:
                raise RuntimeError("stopping rule failed to terminate")
        sums[trial] = sum(past)
        lengths[trial] = len(past)

    lhs = float(np.mean(sums))
    rhs = float(np.mean(lengths)) * x_mean
    ratio = lhs / rhs if rhs else math.inf
    # Relative error of the ratio: combine the standard errors of both sides.
    se_lhs = float(np.std(sums) / math.sqrt(trials)) / max(lhs, 1e-12)
    se_rhs = float(np.std(lengths) / math.sqrt(trials)) * x_mean / max(rhs, 1e-12)
    ci_width = 1.96 * math.sqrt(se_lhs**2 + se_rhs**2)
    return lhs, rhs, ratio, ci_width


# ---------------------------------------------------------------------------
# Exact square roots and random rational distributions (test plumbing that
# the verification suites also rely on)
# ---------------------------------------------------------------------------


def exact_sqrt(x: Fraction) -> Fraction:
    """Square root of a nonnegative rational, raising if it is irrational."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("negative input")
    rn = math.isqrt(x.numerator)
    rd = math.isqrt(x.denominator)
    if rn * rn != x.numerator or rd * rd != x.denominator:
        raise ValueError(f"{x} is not a perfect square")
    return Fraction(rn, rd)


def random_rational_probs(
    rng: RngStream, size: int, weight_limit: int = 32
) -> list[Fraction]:
    """A random exact probability vector with denominators <= size*weight_limit."""
    while True:
        weights = [int(w) for w in rng.integers(0, weight_limit + 1, size=size)]
        total = sum(weights)
        if total > 0:
            return [Fraction(w, total) for w in weights]


def random_square_fidelity_probs(
    rng: RngStream, size: int, weight_limit: int = 12
) -> tuple[list[Fraction], list[Fraction]]:
    """Two exact probability vectors whose pointwise products are all perfect
    squares of rationals (so Hellinger/fidelity arithmetic stays rational).

    Construction: p_x = u_x^2 / U with positive integers u, and q a
    permutation of p; then sqrt(p_x q_x) = u_x u_sigma(x) / U is rational.
    """
    while True:
        u = [int(w) for w in rng.integers(1, weight_limit + 1, size=size)]
        total = sum(x * x for x in u)
        perm = list(rng.permutation(size))
        if any(u[i] != u[perm[i]] for i in range(size)):
            break
    p = [Fraction(x * x, total) for x in u]
    q = [p[perm[i]] for i in range(size)]
    return p, q
