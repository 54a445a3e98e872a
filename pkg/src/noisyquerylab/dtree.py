"""Deterministic and randomized decision trees, transcripts and their exact
distributions, distinguishing-cost brute force, combinatorial sensitivity
measures, and the sequential Bayesian distinguisher.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .boolfn import OUTSIDE_PROMISE, PartialFn, flip_block
from .dist import FiniteDist, hellinger_sq, hellinger_sq_exact


class ZeroLikelihood(ValueError):
    """A query answer had probability zero under both hypotheses."""


@dataclass(frozen=True)
class Leaf:
    label: int


@dataclass(frozen=True)
class Node:
    index: int
    low: "Tree"  # child for answer 0
    high: "Tree"  # child for answer 1


Tree = Union[Leaf, Node]
Transcript = tuple[tuple[int, int], ...]


def tree_depth(tree: Tree) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(tree_depth(tree.low), tree_depth(tree.high))


def validate_tree(tree: Tree, seen: frozenset = frozenset()) -> None:
    """No query index may repeat along a root-to-leaf path."""
    if isinstance(tree, Leaf):
        return
    if tree.index in seen:
        raise ValueError(f"index {tree.index} repeats on a path")
    child_seen = seen | {tree.index}
    validate_tree(tree.low, child_seen)
    validate_tree(tree.high, child_seen)


def _probe(x, i: int) -> int:
    if hasattr(x, "bit"):
        return x.bit(i)
    return x[i]


def run(tree: Tree, x) -> tuple[int, Transcript, int]:
    """Execute the tree on a dense or lazy input.

    Returns (output, transcript, query_count); the transcript is the ordered
    (index, answer) record and replays to the same leaf.
    """
    pairs = []
    node = tree
    while isinstance(node, Node):
        bit = _probe(x, node.index)
        pairs.append((node.index, bit))
        node = node.high if bit else node.low
    return node.label, tuple(pairs), len(pairs)


def replay_output(tree: Tree, transcript: Transcript) -> int:
    """Walk the tree using recorded answers; used to check replay determinism."""
    answers = dict(transcript)
    node = tree
    while isinstance(node, Node):
        node = node.high if answers[node.index] else node.low
    return node.label


def cost(tree: Tree, mu: FiniteDist):
    """Expected number of queries against mu."""
    zero = Fraction(0) if mu.is_exact else 0.0
    return sum((v * run(tree, x)[2] for x, v in mu.p.items()), start=zero)


def transcript_dist(tree: Tree, mu: FiniteDist, budget: int = 2**16) -> FiniteDist:
    """Pushforward of mu through the tree's transcript map."""
    if len(mu) > budget:
        raise ValueError(f"support {len(mu)} exceeds exact budget {budget}")
    acc: dict = {}
    for x, v in mu.p.items():
        _, tr, _ = run(tree, x)
        acc[tr] = acc.get(tr, 0) + v
    return FiniteDist(acc)


@dataclass(frozen=True)
class RandomizedTree:
    """Finite-support distribution over deterministic decision trees."""

    trees: tuple[Tree, ...]
    weights: tuple

    def __post_init__(self):
        if len(self.trees) != len(self.weights):
            raise ValueError("trees/weights length mismatch")
        if abs(float(sum(self.weights)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @classmethod
    def single(cls, tree: Tree) -> "RandomizedTree":
        return cls((tree,), (Fraction(1),))


def randomized_transcript_dist(r: RandomizedTree, mu: FiniteDist) -> FiniteDist:
    """Joint distribution of (sampled tree identity, transcript)."""
    acc: dict = {}
    for tid, (tree, w) in enumerate(zip(r.trees, r.weights)):
        for tr, v in transcript_dist(tree, mu).p.items():
            acc[(tid, tr)] = w * v
    return FiniteDist(acc)


def transcript_h2(
    r: RandomizedTree, mu0: FiniteDist, mu1: FiniteDist, exact: bool = False
):
    """Squared Hellinger between the transcript distributions of r on mu0 and
    mu1, via the disjoint-mixture decomposition over sampled trees."""
    h2 = hellinger_sq_exact if exact else hellinger_sq
    zero = Fraction(0) if exact else 0.0
    return sum(
        (
            w * h2(transcript_dist(t, mu0), transcript_dist(t, mu1))
            for t, w in zip(r.trees, r.weights)
        ),
        start=zero,
    )


def transcript_h2_joint(
    r: RandomizedTree, mu0: FiniteDist, mu1: FiniteDist, exact: bool = False
):
    """Same quantity computed directly on the joint (tree, transcript) laws;
    cross-checks the mixture decomposition."""
    h2 = hellinger_sq_exact if exact else hellinger_sq
    return h2(randomized_transcript_dist(r, mu0), randomized_transcript_dist(r, mu1))


# ---------------------------------------------------------------------------
# Tree enumeration and distinguishing-cost brute force
# ---------------------------------------------------------------------------


def enumerate_trees(n: int, depth: int) -> list[Tree]:
    """All canonical query structures on n bits up to the given depth (leaf
    labels fixed to 0: they do not affect costs or transcripts)."""

    def build(avail: tuple[int, ...], d: int) -> list[Tree]:
        out: list[Tree] = [Leaf(0)]
        if d == 0:
            return out
        for pos, i in enumerate(avail):
            rest = avail[:pos] + avail[pos + 1 :]
            subs = build(rest, d - 1)
            out.extend(Node(i, lo, hi) for lo in subs for hi in subs)
        return out

    return build(tuple(range(n)), depth)


def distinguishing_cost_bruteforce(
    mu0: FiniteDist,
    mu1: FiniteDist,
    n: int,
    depth: Optional[int] = None,
    weight_steps: int = 64,
    mixture_budget: int = 400,
) -> float:
    """Upper bound on the Hellinger distinguishing cost of (mu0, mu1):
    min over enumerated deterministic trees, and over two-tree mixtures on a
    1/weight_steps weight grid, of min(cost(R,mu0), cost(R,mu1)) / h2 of the
    transcript distributions, with x/0 = +inf.

    The true quantity is an infimum over all randomized trees; enumerating
    single trees plus coarse two-tree mixtures yields an upper bound.  When
    more than `mixture_budget` trees exist, mixtures are restricted to the
    best `mixture_budget` single trees.
    """
    if n > 4:
        raise ValueError("brute force limited to n <= 4")
    depth = n if depth is None else depth
    trees = enumerate_trees(n, depth)
    stats = []
    for t in trees:
        c0 = float(cost(t, mu0))
        c1 = float(cost(t, mu1))
        h2 = hellinger_sq(transcript_dist(t, mu0), transcript_dist(t, mu1))
        stats.append((c0, c1, h2))

    def ratio(c0, c1, h2):
        num = min(c0, c1)
        # x/0 = +inf; float normalization noise can leave h2 ~ 1e-33 where it
        # is exactly zero, so anything below the noise floor counts as zero.
        if h2 <= 1e-15:
            return math.inf
        return num / h2

    best = min(ratio(*s) for s in stats)

    candidates = sorted(range(len(stats)), key=lambda idx: ratio(*stats[idx]))
    candidates = candidates[:mixture_budget]
    grid = [w / weight_steps for w in range(1, weight_steps)]
    for ai in range(len(candidates)):
        a0, a1, ah = stats[candidates[ai]]
        for bi in range(ai + 1, len(candidates)):
            b0, b1, bh = stats[candidates[bi]]
            for w in grid:
                c0 = w * a0 + (1 - w) * b0
                c1 = w * a1 + (1 - w) * b1
                h2 = w * ah + (1 - w) * bh
                r = ratio(c0, c1, h2)
                if r < best:
                    best = r
    return best


def random_tree(m: int, max_depth: int, rng, stop_prob: float = 0.25) -> Tree:
    """A random canonical decision tree on m bits (used by the cost sweeps)."""

    def build(avail: list[int], d: int, at_root: bool) -> Tree:
        if d == 0 or not avail or (not at_root and rng.random() < stop_prob):
            return Leaf(int(rng.integers(0, 2)))
        i = int(avail[int(rng.integers(0, len(avail)))])
        rest = [j for j in avail if j != i]
        return Node(i, build(rest, d - 1, False), build(rest, d - 1, False))

    tree = build(list(range(m)), max_depth, True)
    if isinstance(tree, Leaf):
        i = int(rng.integers(0, m))
        tree = Node(i, Leaf(0), Leaf(1))
    return tree


# ---------------------------------------------------------------------------
# Block sensitivity, fractional block sensitivity, sensitivity
# ---------------------------------------------------------------------------


def sensitive_blocks(f: PartialFn, x: Sequence[int]) -> list[tuple[int, ...]]:
    """All sensitive blocks of f at x: subsets B with x^B in Dom(f) and
    f(x^B) != f(x).  Exponential in arity; guarded at arity <= 12."""
    if f.arity > 12:
        raise ValueError("block enumeration limited to arity <= 12")
    x = tuple(x)
    fx = f.eval(x)
    if fx is OUTSIDE_PROMISE:
        raise ValueError("x is outside the promise")
    blocks = []
    for mask in range(1, 2**f.arity):
        block = tuple(i for i in range(f.arity) if mask >> i & 1)
        fy = f.eval(flip_block(x, block))
        if fy is not OUTSIDE_PROMISE and fy != fx:
            blocks.append(block)
    return blocks


def sensitivity(f: PartialFn, x: Sequence[int]) -> int:
    return sum(1 for b in sensitive_blocks(f, x) if len(b) == 1)


def block_sensitivity(f: PartialFn, x: Sequence[int]) -> int:
    """Maximum number of pairwise disjoint sensitive blocks, by exhaustive
    packing search over minimal sensitive blocks."""
    masks = [sum(1 << i for i in b) for b in sensitive_blocks(f, x)]
    # Any block containing a smaller sensitive block can be replaced by it.
    minimal = [m for m in masks if not any(o != m and o & m == o for o in masks)]
    minimal.sort(key=lambda m: m.bit_count())
    best = 0

    def rec(idx: int, used: int, count: int):
        nonlocal best
        if count > best:
            best = count
        if count + (len(minimal) - idx) <= best:
            return
        for j in range(idx, len(minimal)):
            if minimal[j] & used == 0:
                rec(j + 1, used | minimal[j], count + 1)

    rec(0, 0, 0)
    return best


def fbs(f: PartialFn, x: Sequence[int]) -> Fraction:
    """Fractional block sensitivity at x: the exact optimum of the packing LP
    max sum w_B subject to sum_{B ni i} w_B <= 1, w >= 0."""
    blocks = sensitive_blocks(f, x)
    if not blocks:
        return Fraction(0)
    n = f.arity
    a_rows = [[Fraction(1 if i in b else 0) for b in blocks] for i in range(n)]
    return _simplex_max(a_rows, [Fraction(1)] * n, [Fraction(1)] * len(blocks))


def _simplex_max(
    a_rows: list[list[Fraction]], b: list[Fraction], c: list[Fraction]
) -> Fraction:
    """Exact-rational simplex for max c

    .x s.t. Ax <= b, x >= 0 with b >= 0,
    using Bland's rule (terminates, no cycling).
    """
    m, n = len(a_rows), len(c)
    # Tableau: rows 0..m-1 constraints with slack identity, row m = objective.
    tab = [
        [Fraction(v) for v in a_rows[i]]
        + [Fraction(1 if j == i else 0) for j in range(m)]
        + [Fraction(b[i])]
        for i in range(m)
    ]
    tab.append([-Fraction(v) for v in c] + [Fraction(0)] * (m + 1))
    basis = [n + i for i in range(m)]
    total = n + m
    while True:
        enter = next((j for j in range(total) if tab[m][j] < 0), None)
        if enter is None:
            return tab[m][total]
        pivot_row, pivot_ratio = None, None
        for i in range(m):
            if tab[i][enter] > 0:
                ratio = tab[i][total] / tab[i][enter]
                if (
                    pivot_ratio is None
                    or ratio < pivot_ratio
                    or (ratio == pivot_ratio and basis[i] < basis[pivot_row])
                ):
                    pivot_row, pivot_ratio = i, ratio
        if pivot_row is None:
            raise ArithmeticError("unbounded LP (cannot happen for packing)")
        piv = tab[pivot_row][enter]
        tab[pivot_row] = [v / piv for v in tab[pivot_row]]
        for i in range(m + 1):
            if i != pivot_row and tab[i][enter] != 0:
                factor = tab[i][enter]
                tab[i] = [v - factor * w for v, w in zip(tab[i], tab[pivot_row])]
        basis[pivot_row] = enter


# ---------------------------------------------------------------------------
# Sequential Bayesian distinguisher
# ---------------------------------------------------------------------------


def _step_prob(mu: FiniteDist, z: list, i: int, ans: int):
    """Pr[bit i = ans | consistent with z] under mu, 0 on a dead branch."""
    mass = 0
    hit = 0
    for o, v in mu.p.items():
        if all(zb is None or o[j] == zb for j, zb in enumerate(z)):
            mass += v
            if o[i] == ans:
                hit += v
    if mass == 0:
        return 0
    return hit / mass


def bayes_distinguisher(
    transcripts: Iterable[Transcript],
    mu0: FiniteDist,
    mu1: FiniteDist,
    eta: float,
) -> tuple[int, int]:
    """Sequentially read transcripts of runs on mu_b and guess b.

    Accumulates per-query log-likelihood-ratio increments (base 2) and stops
    as soon as the absolute log odds exceed (1/2) log((1+eta)/(1-eta)),
    outputting the sign; outputs the fixed fallback 0 if the stream ends
    first.  Returns (guess, transcripts consumed).
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    n = len(next(iter(mu0.p)))
    threshold = 0.5 * math.log2((1 + eta) / (1 - eta))
    logodds = 0.0
    consumed = 0
    for tr in transcripts:
        consumed += 1
        z: list = [None] * n
        for i, ans in tr:
            p0 = float(_step_prob(mu0, z, i, ans))
            p1 = float(_step_prob(mu1, z, i, ans))
            if p0 == 0 and p1 == 0:
                raise ZeroLikelihood(f"answer ({i},{ans}) impossible under both")
            if p0 == 0:
                return 1, consumed
            if p1 == 0:
                return 0, consumed
            logodds += math.log2(p1 / p0)
            if abs(logodds) > threshold:
                return (1 if logodds > 0 else 0), consumed
            z[i] = ans
    return 0, consumed


# ---------------------------------------------------------------------------
# Nested-parenthesis serialization
# ---------------------------------------------------------------------------


def tree_to_text(tree: Tree) -> str:
    if isinstance(tree, Leaf):
        return str(tree.label)
    return f"({tree.index} {tree_to_text(tree.low)} {tree_to_text(tree.high)})"


def tree_from_text(text: str) -> Tree:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def parse() -> Tree:
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            index = int(tokens[pos])
            pos += 1
            low = parse()
            high = parse()
            if tokens[pos] != ")":
                raise ValueError("malformed tree text")
            pos += 1
            return Node(index, low, high)
        return Leaf(int(tok))

    try:
        tree = parse()
    except IndexError as exc:
        raise ValueError("truncated tree text") from exc
    if pos != len(tokens):
        raise ValueError("trailing tokens in tree text")
    return tree
