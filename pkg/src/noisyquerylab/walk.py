"""Random-walk conversion of a delta-bias oracle into an exact i.i.d. stream
of gamma-bias bits, plus the gap-majority gadget adapter that realizes noisy
oracle calls from gadget queries.

A stream segment is a gambler's-ruin excursion between adjacent multiples of
t: its direction is decided by one (degraded) delta-oracle bit, and the step
sequence is drawn from the walk conditioned on that exit side, whose law is
the same under bias +gamma and -gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .boolfn import gapmaj_levels
from .noisy import degrade_flip_prob, majority_bias_sweep, to_fraction

_MAX_WALK_STEPS = 10**7


class PromiseViolation(ValueError):
    """Gadget contents fall outside the gap-majority promise."""


# ---------------------------------------------------------------------------
# Walk parameters and closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WalkParams:
    gamma: object
    delta: object
    t: int
    big_r: object  # ((1+gamma)/(1-gamma))^t
    delta_prime: object  # (R-1)/(R+1)
    p_up: object  # R/(R+1)


def walk_params(gamma, delta) -> WalkParams:
    """Derived constants of the conversion; exact rationals for rational
    inputs.  Requires 0 < gamma, delta <= 1 and delta/gamma >= 5 (so that the
    segment span t = floor(delta/(5 gamma)) is at least 1).

    Float parameters are interpreted as their nearest 12-digit rational, so
    decimals like 0.1 mean exactly 1/10 (a raw binary float epsilon-off the
    boundary would otherwise flip t).
    """
    g = Fraction(gamma).limit_denominator(10**12) if isinstance(gamma, float) else Fraction(gamma)
    d = Fraction(delta).limit_denominator(10**12) if isinstance(delta, float) else Fraction(delta)
    if not 0 < g < 1 or not 0 < d <= 1:
        raise ValueError("need 0 < gamma < 1 and 0 < delta <= 1")
    if d / g < 5:
        raise ValueError("need delta/gamma >= 5")
    t = int(d / (5 * g))
    if t > 10**4:
        # Exact powers stay cheap up to ~1e4; beyond that use high precision.
        import mpmath

        with mpmath.workdps(50):
            gf = mpmath.mpf(g.numerator) / g.denominator
            big_r = ((1 + gf) / (1 - gf)) ** t
            dp = (big_r - 1) / (big_r + 1)
            return WalkParams(g, d, t, float(big_r), float(dp), float(big_r / (big_r + 1)))
    big_r = ((1 + g) / (1 - g)) ** t
    delta_prime = (big_r - 1) / (big_r + 1)
    p_up = big_r / (big_r + 1)
    return WalkParams(g, d, t, big_r, delta_prime, p_up)


def expected_hitting_steps(gamma, t: int) -> float:
    """Expected steps for a bias-gamma walk from 0 to reach +-t (gambler's
    ruin): (t/g) * (1 - 2 (1-g)^t ((1+g)^t - (1-g)^t) / ((1+g)^{2t} - (1-g)^{2t}))."""
    g = float(gamma)
    if g == 0:
        return float(t * t)
    up = (1 + g) ** t
    dn = (1 - g) ** t
    return (t / g) * (1 - 2 * dn * (up - dn) / (up * up - dn * dn))


def hitting_steps_lower_bound(gamma, t: int) -> float:
    g = float(gamma)
    return t * t / (1 + g * t)


def hitting_up_probability(gamma, t: int):
    """Exact probability that the bias-gamma walk reaches +t before -t."""
    p = walk_params_ratio(gamma, t)
    return p / (p + 1) if isinstance(p, Fraction) else p / (p + 1.0)


def walk_params_ratio(gamma, t: int):
    g = Fraction(gamma)
    return ((1 + g) / (1 - g)) ** t


# ---------------------------------------------------------------------------
# Segment sampling
# ---------------------------------------------------------------------------


def segment_sample(gamma, t: int, direction: int, rng, max_steps: int = _MAX_WALK_STEPS):
    """One +-1 step sequence from 0 hitting +t before -t (direction=1) or the
    mirror (direction=0), drawn by rejection from the bias-+gamma walk.

    The conditioned law is identical under bias +-gamma, and the mirrored
    up-exit law equals the down-exit law, so a single rejection sampler covers
    every case; acceptance probability is R/(R+1) >= 1/2.  Attempts are capped
    at max_steps: exceeding the cap raises instead of silently biasing.
    """
    p_step = (1 + float(gamma)) / 2
    while True:
        pos = 0
        steps: list[int] = []
        while -t < pos < t:
            if len(steps) >= max_steps:
                raise RuntimeError("walk exceeded the step cap")
            s = 1 if rng.random() < p_step else -1
            steps.append(s)
            pos += s
        if pos == t:
            if direction == 1:
                return steps
            return [-s for s in steps]


def sample_raw_segments(
    gamma, t: int, n_segments: int, rng, max_steps: int = _MAX_WALK_STEPS
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized unconditioned gambler's-ruin segments: returns (lengths,
    exits) arrays with exits in {+1, -1}."""
    p_step = (1 + float(gamma)) / 2
    lengths = np.zeros(n_segments, dtype=np.int64)
    exits = np.zeros(n_segments, dtype=np.int64)
    pos = np.zeros(n_segments, dtype=np.int64)
    active = np.ones(n_segments, dtype=bool)
    steps = 0
    while active.any():
        if steps >= max_steps:
            raise RuntimeError("walk exceeded the step cap")
        idx = np.flatnonzero(active)
        moves = np.where(rng.random(idx.size) < p_step, 1, -1)
        pos[idx] += moves
        lengths[idx] += 1
        hit_up = pos[idx] >= t
        hit_dn = pos[idx] <= -t
        exits[idx[hit_up]] = 1
        exits[idx[hit_dn]] = -1
        active[idx[hit_up | hit_dn]] = False
        steps += 1
    return lengths, exits


class BiasStream:
    """Emits bits that are exactly i.i.d. Bernoulli((1+gamma)/2) toward the
    hidden bit, consuming one delta-bias oracle bit per walk segment."""

    def __init__(self, draw_delta_bit: Callable[[], int], gamma, delta, rng):
        self.params = walk_params(gamma, delta)
        self.draw_delta_bit = draw_delta_bit
        self.rng = rng
        self.gamma = gamma
        self._flip = float(degrade_flip_prob(Fraction(delta), Fraction(self.params.delta_prime)))
        self._buffer: list[int] = []
        self.delta_queries = 0
        self.segment_log: list[tuple[int, int]] = []  # (length, direction)

    def _new_segment(self) -> None:
        raw = self.draw_delta_bit()
        self.delta_queries += 1
        direction = 1 - raw if self.rng.random() < self._flip else raw
        steps = segment_sample(self.gamma, self.params.t, direction, self.rng)
        self.segment_log.append((len(steps), direction))
        self._buffer = [1 if s == 1 else 0 for s in steps]

    def next_bit(self) -> int:
        if not self._buffer:
            self._new_segment()
        return self._buffer.pop(0)

    def stats_rows(self) -> list[dict]:
        return [
            {"segment": i, "length": ln, "direction": d, "delta_queries": 1}
            for i, (ln, d) in enumerate(self.segment_log)
        ]


# ---------------------------------------------------------------------------
# Exact conditioned-law checks
# ---------------------------------------------------------------------------


def enumerate_conditioned_sequences(
    gamma: Fraction, t: int, max_len: int = 12
) -> dict:
    """Exhaustively enumerate walk step sequences up to max_len and verify,
    in exact rationals, that the law conditioned on exiting at +t is the same
    under bias +gamma and -gamma.

    Returns a summary dict: number of up-exit sequences checked, the exact
    enumerated conditional mass (equal under both signs), and the exact
    remaining conditional tail mass (also equal under both signs, since each
    per-sequence probability ratio is exactly R).
    """
    gamma = Fraction(gamma)
    p_plus = (1 + gamma) / 2
    p_minus = (1 - gamma) / 2
    big_r = walk_params_ratio(gamma, t)
    up_prob_plus = big_r / (big_r + 1)
    up_prob_minus = 1 / (big_r + 1)

    checked = 0
    mass_plus = Fraction(0)
    mass_minus = Fraction(0)

    def rec(pos: int, length: int, w_plus: Fraction, w_minus: Fraction):
        nonlocal checked, mass_plus, mass_minus
        if pos == t:
            # Conditional equality <=> w_plus == R * w_minus, exactly.
            if w_plus != big_r * w_minus:
                raise AssertionError("conditioned laws differ")
            if w_plus / up_prob_plus != w_minus / up_prob_minus:
                raise AssertionError("conditioned laws differ")
            checked += 1
            mass_plus += w_plus
            mass_minus += w_minus
            return
        if pos == -t or length == max_len:
            return
        rec(pos + 1, length + 1, w_plus * p_plus, w_minus * p_minus)
        rec(pos - 1, length + 1, w_plus * p_minus, w_minus * p_plus)

    rec(0, 0, Fraction(1), Fraction(1))
    cond_mass = mass_plus / up_prob_plus
    assert cond_mass == mass_minus / up_prob_minus
    return {
        "sequences": checked,
        "conditional_mass": cond_mass,
        "conditional_tail": 1 - cond_mass,
    }


def stream_law_first_bits_exact(gamma, delta, b: int, nbits: int) -> dict:
    """Exact law of the first nbits emitted by the stream construction with
    hidden bit b, by measure propagation over (segment direction, position).

    Matching Bernoulli((1+gamma)/2)^(x)nbits toward b verifies the whole
    mechanism: direction-bit degrading to delta', exit probabilities, and the
    conditioned in-segment step law.
    """
    params = walk_params(Fraction(gamma), Fraction(delta))
    g, t = Fraction(gamma), params.t
    lam = (1 - g) / (1 + g)
    p_step = (1 + g) / 2

    def u(pos: int) -> Fraction:  # up-hit probability from pos under +gamma
        return (1 - lam ** (pos + t)) / (1 - lam ** (2 * t))

    def cond_up_step(pos: int) -> Fraction:  # Pr[step +1 | exits up] at pos
        return p_step * u(pos + 1) / u(pos)

    dir_correct = (1 + Fraction(params.delta_prime)) / 2
    acc: dict = {}

    def rec(state, emitted: tuple, weight: Fraction):
        if weight == 0:
            return
        if len(emitted) == nbits:
            acc[emitted] = acc.get(emitted, Fraction(0)) + weight
            return
        if state is None:
            up_w = dir_correct if b == 1 else 1 - dir_correct
            rec((1, 0), emitted, weight * up_w)
            rec((0, 0), emitted, weight * (1 - up_w))
            return
        direction, pos = state
        step_up = cond_up_step(pos)
        # In mirrored coordinates a down-segment emits the negated step.
        for mv, w in ((1, step_up), (-1, 1 - step_up)):
            bit = 1 if (mv == 1) == (direction == 1) else 0
            npos = pos + mv
            nstate = None if npos == t else (direction, npos)
            rec(nstate, emitted + (bit,), weight * w)

    rec(None, (), Fraction(1))
    return acc


# ---------------------------------------------------------------------------
# Gap-majority gadget adapter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GapMajGadget:
    """A concrete promise input to the gap-majority gadget."""

    n: int
    gap: Fraction
    bits: tuple
    value: int

    @classmethod
    def random(cls, n: int, value: int, rng, gap=Fraction(1)) -> "GapMajGadget":
        lo, hi = gapmaj_levels(n, Fraction(gap))
        weight = hi if value == 1 else lo
        ones = rng.choice(n, size=weight, replace=False)
        bits = [0] * n
        for i in ones:
            bits[int(i)] = 1
        return cls(n, Fraction(gap), tuple(bits), value)

    def __post_init__(self):
        lo, hi = gapmaj_levels(self.n, self.gap)
        w = sum(self.bits)
        if w not in (lo, hi):
            raise PromiseViolation(f"gadget weight {w} not in promise {{{lo},{hi}}}")
        if (1 if w == hi else 0) != self.value:
            raise PromiseViolation("declared value inconsistent with weight")

    @property
    def raw_bias(self) -> Fraction:
        lo, hi = gapmaj_levels(self.n, self.gap)
        return Fraction(hi - lo, self.n)


def sqrt_bias_target(n: int):
    """1/sqrt(n): exact rational for square n, float otherwise."""
    r = math.isqrt(n)
    if r * r == n:
        return Fraction(1, r)
    return 1 / math.sqrt(n)


def gapmaj_oracle_adapter(gadget: GapMajGadget, mode: str, rng) -> tuple[int, int]:
    """Answer one noisy-oracle call through gadget queries.

    cheap: sample uniformly random gadget bits; a single bit has bias
    raw = (hi-lo)/n toward the gadget's value, which is degraded (or, when
    raw < 1/sqrt(n), minimally majority-amplified and then degraded) to bias
    exactly 1/sqrt(n).  full: read all n bits, exact value.  Returns
    (answer, gadget queries used).
    """
    n = gadget.n
    if mode == "full":
        return int(2 * sum(gadget.bits) > n), n

    if mode != "cheap":
        raise ValueError("mode must be 'cheap' or 'full'")
    target = sqrt_bias_target(n)
    raw = gadget.raw_bias

    def read_random_bit() -> int:
        return gadget.bits[int(rng.integers(0, n))]

    if raw >= target:
        bit = read_random_bit()
        queries = 1
        current = raw
    else:
        k = None
        for kk, bias in majority_bias_sweep(raw):
            if bias >= target:
                k, current = kk, to_fraction(bias)
                break
        votes = sum(read_random_bit() for _ in range(k))
        bit = int(2 * votes > k)
        queries = k
    flip = (1 - Fraction(target) / current) / 2 if isinstance(target, Fraction) else (
        1 - target / float(current)
    ) / 2
    if rng.random() < float(flip):
        bit = 1 - bit
    return bit, queries


def adapter_correct_prob_exact(n: int, gap=Fraction(1)) -> Fraction:
    """Exact Pr[cheap-mode answer == gadget value] by measure propagation;
    requires square n so the target bias 1/sqrt(n) is rational.  Equals
    (1 + 1/sqrt(n))/2, i.e. the adapter is exactly a gamma = 1/sqrt(n) call."""
    target = sqrt_bias_target(n)
    if not isinstance(target, Fraction):
        raise ValueError("exact propagation needs square n")
    lo, hi = gapmaj_levels(n, Fraction(gap))
    raw = Fraction(hi - lo, n)
    p_correct_raw = (1 + raw) / 2
    if raw >= target:
        flip = (1 - target / raw) / 2
        return p_correct_raw * (1 - flip) + (1 - p_correct_raw) * flip
    for k, bias in majority_bias_sweep(raw):
        if bias >= target:
            amp = to_fraction(bias)
            p_maj = (1 + amp) / 2
            flip = (1 - target / amp) / 2
            return p_maj * (1 - flip) + (1 - p_maj) * flip
    raise AssertionError("unreachable")
