"""Exact finite-support distributions over bit strings, and the four distance
measures (squared Hellinger, symmetrized chi-squared, Jensen-Shannon, total
variation) with their identities.

Two numeric backends coexist: exact rationals (Fraction) for identity-style
checks and plain floats for large Monte Carlo sweeps.  A distribution's mode
follows its contents.  Conventions: 0*log(0) = 0 and 0/0 = 0 in JS and the
symmetrized chi-squared.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .boolfn import PartialAssignment, consistent
from .stats import exact_sqrt


class ZeroMassCondition(ValueError):
    """Conditioning event has probability zero."""


class OverlapError(ValueError):
    """Supports expected to be disjoint overlap."""


class BudgetError(ValueError):
    """An exact enumeration would exceed its memory/size budget."""


class FiniteDist:
    """Finite-support probability distribution.

    Outcomes are hashable (typically tuples of bits or ints 0/1); probabilities
    are Fractions (exact mode) or floats.  Zero-probability outcomes are
    dropped at construction.
    """

    __slots__ = ("p",)

    def __init__(self, probs: Mapping):
        p = {}
        for outcome, prob in probs.items():
            if prob < 0:
                raise ValueError(f"negative probability for {outcome!r}")
            if prob != 0:
                if outcome in p:
                    raise ValueError(f"duplicate outcome {outcome!r}")
                p[outcome] = prob
        if not p:
            raise ValueError("empty distribution")
        total = sum(p.values())
        if isinstance(total, Fraction) or isinstance(total, int):
            if total != 1:
                raise ValueError(f"probabilities sum to {total}, not 1")
        elif abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        self.p = p

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> "FiniteDist":
        return cls(dict(pairs))

    @classmethod
    def point_mass(cls, outcome) -> "FiniteDist":
        return cls({outcome: Fraction(1)})

    @classmethod
    def bernoulli(cls, q) -> "FiniteDist":
        one = Fraction(1) if isinstance(q, (Fraction, int)) else 1.0
        return cls({0: one - q, 1: q}) if 0 < q < 1 else (
            cls({1: one}) if q == 1 else cls({0: one})
        )

    @classmethod
    def uniform(cls, outcomes: Sequence) -> "FiniteDist":
        outcomes = list(outcomes)
        w = Fraction(1, len(outcomes))
        return cls({o: w for o in outcomes})

    # -- basic queries ------------------------------------------------------

    def support(self):
        return self.p.keys()

    def prob(self, outcome):
        return self.p.get(outcome, 0)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, (Fraction, int)) for v in self.p.values())

    def __len__(self):
        return len(self.p)

    def __eq__(self, other):
        return isinstance(other, FiniteDist) and self.p == other.p

    def __repr__(self):
        items = ", ".join(f"{o!r}: {v}" for o, v in sorted(self.p.items(), key=repr))
        return f"FiniteDist({{{items}}})"

    # -- operations over bit-string outcomes --------------------------------

    def condition(self, z: PartialAssignment) -> "FiniteDist":
        """Restrict to outcomes consistent with the partial assignment z and
        renormalize; raises ZeroMassCondition on an impossible z."""
        kept = {o: v for o, v in self.p.items() if consistent(o, z)}
        mass = sum(kept.values())
        if not kept or mass == 0:
            raise ZeroMassCondition(f"assignment {z!r} has zero mass")
        return FiniteDist({o: v / mass for o, v in kept.items()})

    def marginal(self, i: int):
        """Pr[bit i = 1] (a Bernoulli parameter in the distribution's mode)."""
        return sum(v for o, v in self.p.items() if o[i] == 1)

    def marginal_dist(self, i: int) -> "FiniteDist":
        q = self.marginal(i)
        one = Fraction(1) if self.is_exact else 1.0
        return FiniteDist({b: pr for b, pr in ((0, one - q), (1, q)) if pr != 0})

    def tensor_power(self, k: int, budget: int = 2**20) -> "FiniteDist":
        """Distribution of k independent samples.  Tuple outcomes are
        concatenated (so bit strings stay bit strings); other outcomes are
        collected into k-tuples."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if len(self.p) ** k > budget:
            raise BudgetError(f"support {len(self.p)}^{k} exceeds budget {budget}")
        flatten = all(isinstance(o, tuple) for o in self.p)
        acc = {(): _one_like(next(iter(self.p.values())))}
        for _ in range(k):
            nxt = {}
            for prefix, w in acc.items():
                for o, v in self.p.items():
                    key = prefix + (o if flatten else (o,))
                    nxt[key] = nxt.get(key, 0) + w * v
            acc = nxt
        return FiniteDist(acc)

    def sample(self, rng):
        u = rng.random()
        acc = 0.0
        items = list(self.p.items())
        for o, v in items:
            acc += float(v)
            if u < acc:
                return o
        return items[-1][0]

    # -- serialization ------------------------------------------------------

    def to_records(self) -> list:
        """JSON-friendly [(outcome, numerator, denominator), ...] records."""
        recs = []
        for o, v in sorted(self.p.items(), key=repr):
            f = v if isinstance(v, Fraction) else Fraction(v)
            out = list(o) if isinstance(o, tuple) else o
            recs.append([out, f.numerator, f.denominator])
        return recs

    @classmethod
    def from_records(cls, records) -> "FiniteDist":
        probs = {}
        for out, num, den in records:
            o = tuple(out) if isinstance(out, list) else out
            probs[o] = Fraction(num, den)
        return cls(probs)


def _one_like(v):
    return Fraction(1) if isinstance(v, (Fraction, int)) else 1.0


class ProductDist:
    """Product of independent finite distributions (sampled factorwise)."""

    def __init__(self, factors: Sequence[FiniteDist]):
        if not factors:
            raise ValueError("need at least one factor")
        self.factors = list(factors)

    def sample(self, rng) -> tuple:
        parts = []
        for f in self.factors:
            o = f.sample(rng)
            parts.extend(o if isinstance(o, tuple) else (o,))
        return tuple(parts)

    def explicit(self, budget: int = 2**20) -> FiniteDist:
        size = 1
        for f in self.factors:
            size *= len(f.p)
            if size > budget:
                raise BudgetError("explicit product exceeds budget")
        acc = {(): Fraction(1) if all(f.is_exact for f in self.factors) else 1.0}
        for f in self.factors:
            nxt = {}
            for prefix, w in acc.items():
                for o, v in f.p.items():
                    key = prefix + (o if isinstance(o, tuple) else (o,))
                    nxt[key] = w * v
            acc = nxt
        return FiniteDist(acc)


# ---------------------------------------------------------------------------
# Distance measures
# ---------------------------------------------------------------------------


def _union_items(p: FiniteDist, q: FiniteDist):
    for x in p.p.keys() | q.p.keys():
        yield p.prob(x), q.prob(x)


def hellinger_sq(p: FiniteDist, q: FiniteDist) -> float:
    """Squared Hellinger distance (1/2) sum (sqrt(p)-sqrt(q))^2, in floats."""
    return 0.5 * sum(
        (math.sqrt(a) - math.sqrt(b)) ** 2 for a, b in _union_items(p, q)
    )


def hellinger_sq_exact(p: FiniteDist, q: FiniteDist) -> Fraction:
    """Exact rational squared Hellinger; requires every pointwise product
    p(x)q(x) to be a perfect square of a rational."""
    total = Fraction(0)
    for a, b in _union_items(p, q):
        a, b = Fraction(a), Fraction(b)
        total += a + b - 2 * exact_sqrt(a * b)
    return total / 2


def fidelity(p: FiniteDist, q: FiniteDist) -> float:
    return sum(math.sqrt(a * b) for a, b in _union_items(p, q))


def fidelity_exact(p: FiniteDist, q: FiniteDist) -> Fraction:
    return sum(
        (exact_sqrt(Fraction(a) * Fraction(b)) for a, b in _union_items(p, q)),
        start=Fraction(0),
    )


def chi_sym_sq(p: FiniteDist, q: FiniteDist):
    """Symmetrized chi-squared (1/2) sum (p-q)^2/(p+q) with 0/0 = 0.  Exact
    whenever both distributions are exact."""
    exact = p.is_exact and q.is_exact
    total = Fraction(0) if exact else 0.0
    for a, b in _union_items(p, q):
        s = a + b
        if s != 0:
            total += (a - b) * (a - b) / s
    return total / 2


def js(p: FiniteDist, q: FiniteDist) -> float:
    """Jensen-Shannon distance in bits (base-2 logs), 0*log0 = 0."""
    total = 0.0
    for a, b in _union_items(p, q):
        a, b = float(a), float(b)
        s = a + b
        if a > 0:
            total += a * math.log2(2 * a / s)
        if b > 0:
            total += b * math.log2(2 * b / s)
    return total / 2


def tvd(p: FiniteDist, q: FiniteDist):
    total = Fraction(0) if p.is_exact and q.is_exact else 0.0
    for a, b in _union_items(p, q):
        total += abs(a - b)
    return total / 2


def disjoint_mixture_h2(
    pairs: Sequence[tuple[FiniteDist, FiniteDist]],
    weights: Sequence,
    exact: bool = False,
):
    """Squared Hellinger of a disjoint mixture: sum_a w_a h2(p_a, q_a).

    The supports of distinct pairs must be disjoint (OverlapError otherwise);
    under that condition this equals hellinger_sq of the mixed distributions.
    """
    if len(pairs) != len(weights):
        raise ValueError("pairs and weights length mismatch")
    if abs(float(sum(weights)) - 1.0) > 1e-12:
        raise ValueError("weights must form a distribution")
    seen: set = set()
    for pa, qa in pairs:
        block = set(pa.p) | set(qa.p)
        if block & seen:
            raise OverlapError("pair supports overlap")
        seen |= block
    h2 = hellinger_sq_exact if exact else hellinger_sq
    zero = Fraction(0) if exact else 0.0
    return sum((w * h2(pa, qa) for w, (pa, qa) in zip(weights, pairs)), start=zero)


def mix_disjoint(
    pairs: Sequence[tuple[FiniteDist, FiniteDist]], weights: Sequence
) -> tuple[FiniteDist, FiniteDist]:
    """The two mixed distributions (tagging outcomes by pair index to keep
    supports disjoint even if callers reused outcome labels)."""
    pm, qm = {}, {}
    for idx, (w, (pa, qa)) in enumerate(zip(weights, pairs)):
        for o, v in pa.p.items():
            pm[(idx, o)] = w * v
        for o, v in qa.p.items():
            qm[(idx, o)] = w * v
    return FiniteDist(pm), FiniteDist(qm)


# ---------------------------------------------------------------------------
# Entropy / information helpers (bits)
# ---------------------------------------------------------------------------


def entropy_bits(p: FiniteDist) -> float:
    return -sum(float(v) * math.log2(float(v)) for v in p.p.values() if v > 0)


def binary_entropy(x: float) -> float:
    x = float(x)
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def coin_information(p0: FiniteDist, p1: FiniteDist, gamma: float = 0.0) -> float:
    """I(Z; Y_Z) in bits for Z ~ Bernoulli((1+gamma)/2), Y_Z ~ mu_Z.

    At gamma = 0 this equals the Jensen-Shannon distance JS(mu_0, mu_1).
    """
    w1 = (1 + gamma) / 2
    w0 = 1 - w1
    mixture = {}
    for o in p0.p.keys() | p1.p.keys():
        mixture[o] = w0 * float(p0.prob(o)) + w1 * float(p1.prob(o))
    h_y = -sum(v * math.log2(v) for v in mixture.values() if v > 0)
    h_y_given_z = w0 * entropy_bits(p0) + w1 * entropy_bits(p1)
    return h_y - h_y_given_z
