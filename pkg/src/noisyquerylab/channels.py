"""Binary symmetric and erasure channels with exact conditional-entropy
computation, plus the error/entropy (Fano and Hellman-Raviv) and
noisy-vs-erasure entropy comparisons, verified by exhaustive enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .boolfn import OUTSIDE_PROMISE, PartialFn, int_to_bits
from .dist import BudgetError, FiniteDist, binary_entropy

ERASED = "*"


class SupportOutsidePromise(ValueError):
    """The input distribution puts mass outside the function's promise."""


@dataclass(frozen=True)
class ChannelSpec:
    """kind 'noisy': flip each bit independently with probability (1-param)/2
    (param is the per-bit bias rho).  kind 'erasure': keep each bit with
    probability param, else output the erasure symbol."""

    kind: str
    param: object

    def __post_init__(self):
        if self.kind not in ("noisy", "erasure"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not 0 <= self.param <= 1:
            raise ValueError("channel parameter must lie in [0, 1]")


def noisy_channel(rho) -> ChannelSpec:
    return ChannelSpec("noisy", rho)


def erasure_channel(keep_prob) -> ChannelSpec:
    return ChannelSpec("erasure", keep_prob)


def apply_channel(spec: ChannelSpec, bits: Sequence[int], rng) -> tuple:
    if spec.kind == "noisy":
        flip = (1 - float(spec.param)) / 2
        return tuple(1 - b if rng.random() < flip else b for b in bits)
    keep = float(spec.param)
    return tuple(b if rng.random() < keep else ERASED for b in bits)


# ---------------------------------------------------------------------------
# Exact conditional entropy
# ---------------------------------------------------------------------------


def _check_support(f: PartialFn, mu: FiniteDist) -> None:
    for x in mu.support():
        if f.eval(x) is OUTSIDE_PROMISE:
            raise SupportOutsidePromise(f"{x} is outside the promise of {f.name}")


def _posteriors_noisy(f: PartialFn, mu: FiniteDist, rho) -> list:
    """(weight, Pr[f(X)=1 | Y=y]) over the noisy channel's outputs y."""
    n = f.arity
    if n > 12:
        raise BudgetError("noisy-channel enumeration limited to arity <= 12")
    flip = (1 - Fraction(rho)) / 2
    keepp = 1 - flip
    rows = []
    support = [(x, v, f.eval(x)) for x, v in mu.p.items()]
    for y_int in range(2**n):
        y = int_to_bits(y_int, n)
        mass = [Fraction(0), Fraction(0)]
        for x, v, fx in support:
            agree = sum(1 for a, b in zip(x, y) if a == b)
            w = v * keepp**agree * flip ** (n - agree)
            mass[fx] += w
        tot = mass[0] + mass[1]
        if tot:
            rows.append((tot, mass[1] / tot))
    return rows


def _posteriors_erasure(f: PartialFn, mu: FiniteDist, keep_prob) -> list:
    """Same, for the erasure channel; iterates over erasure patterns and
    within each over consistent kept projections (avoids 3^n supports)."""
    n = f.arity
    if n > 8:
        raise BudgetError("erasure-channel enumeration limited to arity <= 8")
    keep = Fraction(keep_prob)
    rows = []
    support = [(x, v, f.eval(x)) for x, v in mu.p.items()]
    for kept in itertools.product((0, 1), repeat=n):
        size = sum(kept)
        w_pattern = keep**size * (1 - keep) ** (n - size)
        if w_pattern == 0:
            continue
        groups: dict = {}
        for x, v, fx in support:
            proj = tuple(b for b, k in zip(x, kept) if k)
            m = groups.setdefault(proj, [Fraction(0), Fraction(0)])
            m[fx] += v
        for m0, m1 in groups.values():
            tot = m0 + m1
            rows.append((w_pattern * tot, m1 / tot))
    return rows


def _posterior_rows(f: PartialFn, mu: FiniteDist, spec: ChannelSpec) -> list:
    _check_support(f, mu)
    if spec.kind == "noisy":
        return _posteriors_noisy(f, mu, spec.param)
    return _posteriors_erasure(f, mu, spec.param)


def cond_entropy_exact(f: PartialFn, mu: FiniteDist, spec: ChannelSpec) -> float:
    """H(f(X) | Y) in bits, for X ~ mu and Y the channel output, by exact
    joint enumeration (posteriors exact; the final entropy is a float)."""
    return float(
        sum(float(w) * binary_entropy(float(p1)) for w, p1 in _posterior_rows(f, mu, spec))
    )


def bayes_error_exact(f: PartialFn, mu: FiniteDist, spec: ChannelSpec) -> Fraction:
    """Exact error of the Bayes rule for guessing f(X) from Y (posterior ties
    resolve to output 0, which keeps per-observation error <= 1/2)."""
    return sum(
        (w * min(p1, 1 - p1) for w, p1 in _posterior_rows(f, mu, spec)),
        start=Fraction(0),
    )


def fano_bounds_check(
    f: PartialFn, mu: FiniteDist, spec: ChannelSpec, slack: float = 1e-12
) -> tuple[Fraction, float, bool, bool]:
    """(err_bayes, H, lower_ok, upper_ok): checks the sandwich
    2 * err <= H(f(X)|Y) <= h(err)."""
    rows = _posterior_rows(f, mu, spec)
    err = sum((w * min(p1, 1 - p1) for w, p1 in rows), start=Fraction(0))
    h = float(sum(float(w) * binary_entropy(float(p1)) for w, p1 in rows))
    lower_ok = 2 * float(err) <= h + slack
    upper_ok = h <= binary_entropy(float(err)) + slack
    return err, h, lower_ok, upper_ok


def samorodnitsky_check(
    f: PartialFn, mu: FiniteDist, rho, slack: float = 1e-12
) -> tuple[float, float, float]:
    """(H_noisy, H_erasure, margin): conditional entropy through the noisy
    channel with bias rho against the erasure channel keeping bits with
    probability rho^2.  The margin H_noisy - H_erasure must be >= -slack."""
    rho = Fraction(rho)
    h_noisy = cond_entropy_exact(f, mu, noisy_channel(rho))
    h_erase = cond_entropy_exact(f, mu, erasure_channel(rho * rho))
    margin = h_noisy - h_erase
    if margin < -slack:
        raise AssertionError(f"noisy-vs-erasure margin {margin} below -{slack}")
    return h_noisy, h_erase, margin


# ---------------------------------------------------------------------------
# Sweep plumbing
# ---------------------------------------------------------------------------


def random_partial_fn(n: int, rng, name: str) -> PartialFn:
    """A random partial function on n bits whose domain contains both values."""
    while True:
        table = [int(v) for v in rng.integers(0, 5, size=2**n)]
        # 0,1 -> that value; 2,3,4 -> outside the promise.
        values = [v if v < 2 else None for v in table]
        if 0 in values and 1 in values:
            break

    def fn(x):
        v = values[sum(b << i for i, b in enumerate(x))]
        return OUTSIDE_PROMISE if v is None else v

    return PartialFn(n, name, fn)


def random_mu_on_domain(f: PartialFn, rng) -> FiniteDist:
    dom = list(f.domain())
    weights = [int(w) + 1 for w in rng.integers(0, 16, size=len(dom))]
    total = sum(weights)
    return FiniteDist({x: Fraction(w, total) for x, w in zip(dom, weights)})


def all_total_functions(n: int) -> Iterable[PartialFn]:
    """Every total Boolean function on n bits (2^(2^n) of them)."""
    size = 2**n
    for code in range(2**size):
        table = [(code >> i) & 1 for i in range(size)]

        def fn(x, table=tuple(table)):
            return table[sum(b << i for i, b in enumerate(x))]

        yield PartialFn(n, f"total{n}_{code}", fn)


def sweep_rows(
    functions: Sequence[tuple[PartialFn, FiniteDist]], rho_grid: Sequence[Fraction]
) -> list[dict]:
    """Per-cell noisy/erasure entropies, margins, and Bayes errors for the
    CSV export; every margin is also asserted nonnegative (within 1e-12)."""
    rows = []
    for f, mu in functions:
        for rho in rho_grid:
            h_noisy, h_erase, margin = samorodnitsky_check(f, mu, rho)
            err, h, lower_ok, upper_ok = fano_bounds_check(f, mu, noisy_channel(rho))
            if not (lower_ok and upper_ok):
                raise AssertionError(f"error/entropy sandwich failed for {f.name}")
            rows.append(
                {
                    "f_id": f.name,
                    "n": f.arity,
                    "rho": float(rho),
                    "H_noisy": h_noisy,
                    "H_erasure": h_erase,
                    "margin": margin,
                    "err_bayes": float(err),
                }
            )
    return rows
