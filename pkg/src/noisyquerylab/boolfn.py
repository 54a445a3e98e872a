"""Partial Boolean functions: promise checking, gap majority, approximate
indexing, composition, and lazy promise inputs.

Bit strings are plain tuples of 0/1 ints.  Partial assignments are tuples
over {0, 1, None} with None marking an unassigned position.  A function
evaluates to 0, 1, or OUTSIDE_PROMISE on every dense input of its arity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

BitString = tuple[int, ...]
PartialAssignment = tuple[Optional[int], ...]

#: Dense bit strings above this length are refused; use a lazy input instead.
DENSE_LIMIT = 2**20


class DenseSizeError(ValueError):
    """Raised when a dense bit string would exceed DENSE_LIMIT."""


class _OutsidePromise:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OUTSIDE_PROMISE"

    def __bool__(self):
        raise TypeError("OUTSIDE_PROMISE has no truth value; compare explicitly")


OUTSIDE_PROMISE = _OutsidePromise()


def ensure_dense_ok(length: int) -> None:
    if length > DENSE_LIMIT:
        raise DenseSizeError(
            f"dense bit string of length {length} exceeds limit {DENSE_LIMIT}; "
            "use a lazy promise input"
        )


def hamming_weight(x: Sequence[int]) -> int:
    return sum(x)


def flip_block(x: BitString, block: Sequence[int]) -> BitString:
    """Return x with the bits in `block` flipped."""
    y = list(x)
    for i in block:
        y[i] = 1 - y[i]
    return tuple(y)


def consistent(x: Sequence[Optional[int]], z: Sequence[Optional[int]]) -> bool:
    """Two partial assignments agree wherever both are assigned."""
    return all(a is None or b is None or a == b for a, b in zip(x, z))


@dataclass(frozen=True)
class PartialFn:
    """A promise Boolean function given by arity plus a deterministic
    evaluator returning 0, 1, or OUTSIDE_PROMISE on every dense input."""

    arity: int
    name: str
    fn: Callable[[BitString], object] = field(repr=False)

    def eval(self, x: Sequence[int]):
        if len(x) != self.arity:
            raise ValueError(f"{self.name}: expected {self.arity} bits, got {len(x)}")
        return self.fn(tuple(x))

    __call__ = eval

    def domain(self):
        """All promise inputs, by exhaustive enumeration (small arity only)."""
        ensure_dense_ok(self.arity)
        if self.arity > 22:
            raise DenseSizeError("domain enumeration limited to arity <= 22")
        for v in range(2**self.arity):
            x = int_to_bits(v, self.arity)
            if self.eval(x) is not OUTSIDE_PROMISE:
                yield x


def int_to_bits(v: int, n: int) -> BitString:
    return tuple((v >> (n - 1 - i)) & 1 for i in range(n))


def bits_to_int(x: Sequence[int]) -> int:
    v = 0
    for b in x:
        v = (v << 1) | b
    return v


# ---------------------------------------------------------------------------
# Exact threshold arithmetic.  Thresholds of the form m/2 +- coeff*sqrt(m)
# are compared exactly: n >= m/2 + c*sqrt(m) iff (n - m/2) >= 0 and
# (n - m/2)^2 >= c^2 m, all in rational arithmetic.
# ---------------------------------------------------------------------------


def _at_least_sqrt(value: Fraction, coeff: Fraction, m: int) -> bool:
    """Exact test value >= coeff * sqrt(m) for coeff >= 0."""
    if value < 0:
        return False
    return value * value >= coeff * coeff * m


def ceil_half_plus_sqrt(m: int, coeff: Fraction) -> int:
    """ceil(m/2 + coeff*sqrt(m)) computed exactly."""
    coeff = Fraction(coeff)
    n = math.ceil(m / 2 + float(coeff) * math.sqrt(m)) - 2
    while not _at_least_sqrt(Fraction(n) - Fraction(m, 2), coeff, m):
        n += 1
    return n


def floor_half_minus_sqrt(m: int, coeff: Fraction) -> int:
    """floor(m/2 - coeff*sqrt(m)) computed exactly."""
    coeff = Fraction(coeff)
    n = math.floor(m / 2 - float(coeff) * math.sqrt(m)) + 2
    while not _at_least_sqrt(Fraction(m, 2) - Fraction(n), coeff, m):
        n -= 1
    return n


# ---------------------------------------------------------------------------
# Gap majority
# ---------------------------------------------------------------------------


def gapmaj_levels(m: int, gap_coeff: Fraction = Fraction(1)) -> tuple[int, int]:
    """(low, high) Hamming weight levels of the gap majority promise."""
    hi = ceil_half_plus_sqrt(m, gap_coeff)
    lo = floor_half_minus_sqrt(m, gap_coeff)
    if hi > m or lo < 0 or hi <= lo:
        raise ValueError(
            f"degenerate gap majority: m={m}, gap={gap_coeff} gives levels ({lo}, {hi})"
        )
    return lo, hi


def gapmaj(m: int, gap_coeff: Fraction = Fraction(2)) -> PartialFn:
    """Majority on m bits promised to have weight ceil(m/2 + g*sqrt(m)) (value 1)
    or floor(m/2 - g*sqrt(m)) (value 0)."""
    lo, hi = gapmaj_levels(m, gap_coeff)

    def fn(x: BitString):
        w = hamming_weight(x)
        if w == hi:
            return 1
        if w == lo:
            return 0
        return OUTSIDE_PROMISE

    return PartialFn(m, f"gapmaj(m={m},gap={gap_coeff})", fn)


# ---------------------------------------------------------------------------
# Approximate index
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def approx_near_radius(k: int) -> int:
    """Largest Hamming distance d with d <= k/2 - 2*sqrt(k*log2(k)), clamped
    so the exact address (d = 0) always qualifies.

    At small k the unclamped threshold is negative and the promise would be
    empty; the clamp keeps the function well-defined at every k and agrees
    with the unclamped threshold wherever that is nonnegative.  The test
    d <= k/2 - 2*sqrt(k*log2 k) is decided exactly via
    2^((k-2d)^2) >= k^(16k).
    """
    if k < 1:
        raise ValueError("k must be positive")
    if k > 4096:
        raise ValueError("near-radius computation limited to k <= 4096")
    rhs = k ** (16 * k)

    def near(d: int) -> bool:
        e = k - 2 * d
        return e >= 0 and 2 ** (e * e) >= rhs

    lo, hi = 0, k // 2
    if not near(hi):
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if near(mid):
                lo = mid
            else:
                hi = mid
        return lo if near(lo) else 0
    return hi


def _cell_decode(b1: int, b2: int):
    """Two-bit cell decoding: 00 -> 0, 01 -> 1, 10 -> 2, 11 -> invalid."""
    if b1 == 0:
        return b2
    if b2 == 0:
        return 2
    return None


def cell_encode(v: int) -> tuple[int, int]:
    return {0: (0, 0), 1: (0, 1), 2: (1, 0)}[v]


def approxindex(k: int) -> PartialFn:
    """Approximate indexing: a k-bit address plus a 2^k-cell ternary array
    (two bits per cell).  On the promise, every cell within the near radius
    of the address holds one common bit, every other cell holds 2, and the
    value is that common bit."""
    if k < 4:
        raise ValueError("k must be >= 4")
    if k > 16:
        raise ValueError("dense approxindex evaluator limited to k <= 16")
    radius = approx_near_radius(k)
    arity = k + 2 * 2**k
    ensure_dense_ok(arity)

    def fn(x: BitString):
        a = bits_to_int(x[:k])
        value = None
        for c in range(2**k):
            v = _cell_decode(x[k + 2 * c], x[k + 2 * c + 1])
            if v is None:
                return OUTSIDE_PROMISE
            near = (a ^ c).bit_count() <= radius
            if near:
                if v == 2:
                    return OUTSIDE_PROMISE
                if value is None:
                    value = v
                elif v != value:
                    return OUTSIDE_PROMISE
            elif v != 2:
                return OUTSIDE_PROMISE
        return value if value is not None else OUTSIDE_PROMISE

    return PartialFn(arity, f"approxindex(k={k})", fn)


class ApproxIndexInput:
    """Lazy promise input for approxindex: answers any single probe from the
    pair (address, value) without materializing the 2^k-cell array."""

    def __init__(self, k: int, a: Sequence[int], value: int):
        if len(a) != k:
            raise ValueError("address length must equal k")
        if value not in (0, 1):
            raise ValueError("value must be a bit")
        self.k = k
        self.a = tuple(int(b) for b in a)
        self.a_int = bits_to_int(self.a)
        self.value = value
        self.radius = approx_near_radius(k)
        self.bool_arity = k + 2 * 2**k

    def probe_index(self, i: int) -> int:
        return self.a[i]

    def probe_cell(self, b) -> int:
        """Ternary cell content at address b (int or bit tuple)."""
        b_int = b if isinstance(b, int) else bits_to_int(b)
        if (b_int ^ self.a_int).bit_count() <= self.radius:
            return self.value
        return 2

    def bit(self, p: int) -> int:
        """Boolean-view bit at position p (index bits first, then 2 bits/cell)."""
        if p < self.k:
            return self.a[p]
        c, half = divmod(p - self.k, 2)
        return cell_encode(self.probe_cell(c))[half]

    def materialize(self) -> BitString:
        ensure_dense_ok(self.bool_arity)
        bits = list(self.a)
        for c in range(2**self.k):
            bits.extend(cell_encode(self.probe_cell(c)))
        return tuple(bits)


def make_approxindex_input(k: int, a: Sequence[int], value: int) -> ApproxIndexInput:
    return ApproxIndexInput(k, a, value)


# ---------------------------------------------------------------------------
# Composition and small fixtures
# ---------------------------------------------------------------------------


def compose(f: PartialFn, g: PartialFn) -> PartialFn:
    """f composed with arity(f) independent copies of g, on arity(f)*arity(g)
    bits; outside the promise if any inner block or the outer string is."""
    n, m = f.arity, g.arity

    def fn(x: BitString):
        inner = []
        for i in range(n):
            v = g.fn(x[i * m : (i + 1) * m])
            if v is OUTSIDE_PROMISE:
                return OUTSIDE_PROMISE
            inner.append(v)
        return f.fn(tuple(inner))

    return PartialFn(n * m, f"({f.name} o {g.name})", fn)


def triv(n: int) -> PartialFn:
    """Domain {0^n, 1^n}; maps 0^n -> 0 and 1^n -> 1."""

    def fn(x: BitString):
        w = hamming_weight(x)
        if w == 0:
            return 0
        if w == n:
            return 1
        return OUTSIDE_PROMISE

    return PartialFn(n, f"triv({n})", fn)


def or_n(n: int) -> PartialFn:
    return PartialFn(n, f"or({n})", lambda x: int(any(x)))


def and_n(n: int) -> PartialFn:
    return PartialFn(n, f"and({n})", lambda x: int(all(x)))


def parity_n(n: int) -> PartialFn:
    return PartialFn(n, f"parity({n})", lambda x: sum(x) % 2)


def majority_n(n: int) -> PartialFn:
    if n % 2 == 0:
        raise ValueError("majority needs odd arity")
    return PartialFn(n, f"maj({n})", lambda x: int(2 * sum(x) > n))


_ZOO = {
    "gapmaj": lambda p: gapmaj(int(p["m"]), Fraction(p.get("gap", "2"))),
    "approxindex": lambda p: approxindex(int(p["k"])),
    "triv": lambda p: triv(int(p["n"])),
    "or": lambda p: or_n(int(p["n"])),
    "and": lambda p: and_n(int(p["n"])),
    "parity": lambda p: parity_n(int(p["n"])),
    "maj": lambda p: majority_n(int(p["n"])),
}


def function_zoo(spec: str) -> PartialFn:
    """Build a function from a CLI-style spec, e.g. "gapmaj:m=100,gap=2"."""
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name not in _ZOO:
        raise ValueError(f"unknown function {name!r}; known: {sorted(_ZOO)}")
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ValueError(f"malformed parameter {item!r} in {spec!r}")
            params[key.strip()] = val.strip()
    return _ZOO[name](params)
