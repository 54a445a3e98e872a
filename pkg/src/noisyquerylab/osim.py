"""Oracle-simulation protocols: the single-query simulator, the stateful
multi-query session with its Hellinger-budget cutoff, and the lifting that
runs a composed-function algorithm against per-copy simulation sessions.

Everything is available in two modes: sampling (drawing real oracle calls)
and exact measure propagation (Fractions) for faithfulness and cost
identities at small scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .dist import FiniteDist, ProductDist, ZeroMassCondition
from .dtree import Leaf, Node, RandomizedTree, Tree, run as run_tree
from .noisy import BitOracle, NoisyOracle
from .dist import hellinger_sq


# ---------------------------------------------------------------------------
# Conditional marginals with dead-branch handling
# ---------------------------------------------------------------------------


def _cond_bit_probs(mu0: FiniteDist, mu1: FiniteDist, z: Sequence, i: int):
    """(q0, q1) = Pr[bit i = 1] under mu0, mu1 conditioned on z.

    A partial assignment reachable by a faithful run always has positive mass
    under the true hidden bit; it may have zero mass under the other
    distribution, in which case that side's behaviour is unreachable and we
    copy the live side's marginal (making the query free).  Zero mass under
    both signals a corrupted state and raises ZeroMassCondition.
    """

    def stats(mu: FiniteDist):
        mass = 0
        hit = 0
        for o, v in mu.p.items():
            if all(zb is None or o[j] == zb for j, zb in enumerate(z)):
                mass += v
                if o[i] == 1:
                    hit += v
        return mass, hit

    mass0, hit0 = stats(mu0)
    mass1, hit1 = stats(mu1)
    if mass0 == 0 and mass1 == 0:
        raise ZeroMassCondition("assignment impossible under both distributions")
    q0 = hit0 / mass0 if mass0 != 0 else None
    q1 = hit1 / mass1 if mass1 != 0 else None
    if q0 is None:
        q0 = q1
    if q1 is None:
        q1 = q0
    return q0, q1


def _argmin_outcome(q0, q1) -> int:
    """The outcome a minimizing mu0|_i(a) + mu1|_i(a); ties break to a = 0."""
    return 1 if q0 + q1 < 1 else 0


# ---------------------------------------------------------------------------
# Single-query simulation
# ---------------------------------------------------------------------------


def _branch_algebra(p0, p1):
    """Branch measure of the single-query simulator for marginals (p0, p1) of
    the outcome a: returns (s, gamma, target, pa_b0, pa_b1, expected_cost).

    The simulator consults the noisy oracle only with probability s = p0+p1,
    using |p0-p1|/(p0+p1) as the bias parameter, and maps the oracle's answer
    to a/1-a so that Pr[output = a | hidden bit b] is exactly p_b.  The
    expected oracle cost is s * gamma^2 = (p0-p1)^2/(p0+p1).
    """
    s = p0 + p1
    if s == 0:
        zero = Fraction(0) if isinstance(p0, (Fraction, int)) else 0.0
        return s, zero, 1, zero, zero, zero
    gamma = abs(p0 - p1) / s
    target = 1 if p1 >= p0 else 0
    # Pr[oracle answer == target | b]: the answer equals b w.p. (1+gamma)/2.
    q_b0 = (1 + gamma) / 2 if target == 0 else (1 - gamma) / 2
    q_b1 = (1 + gamma) / 2 if target == 1 else (1 - gamma) / 2
    return s, gamma, target, s * q_b0, s * q_b1, s * gamma * gamma


def single_bit_sim(p0, p1, a: int, oracle, rng) -> int:
    """Sample the simulated oracle answer: a with probability exactly p_b.

    p0, p1 must be the conditioned marginals of outcome a under the two
    distributions (so p0 + p1 <= 1); `oracle` answers for the hidden bit b.
    When p0 = p1 = 0 the call short-circuits to 1 - a at zero cost.
    """
    s = p0 + p1
    if s == 0:
        return 1 - a
    if rng.random() >= float(s):
        return 1 - a
    gamma = abs(p0 - p1) / s
    target = 1 if p1 >= p0 else 0
    if oracle.query(gamma) == target:
        return a
    return 1 - a


@dataclass(frozen=True)
class SingleBitSimExact:
    """Exact output laws (per hidden bit) and expected cost of one simulated
    query, obtained by propagating the simulator's branch measure."""

    a: int
    gamma: Fraction
    out_b0: dict
    out_b1: dict
    expected_cost: Fraction


def single_bit_sim_exact(p0, p1, a: int = 0) -> SingleBitSimExact:
    p0, p1 = Fraction(p0), Fraction(p1)
    if p0 + p1 > 1:
        raise ValueError("p0 + p1 must be <= 1 (marginals of the argmin outcome)")
    s, gamma, _target, pa_b0, pa_b1, cost = _branch_algebra(p0, p1)
    out_b0 = {a: pa_b0, 1 - a: 1 - pa_b0}
    out_b1 = {a: pa_b1, 1 - a: 1 - pa_b1}
    return SingleBitSimExact(a, Fraction(gamma), out_b0, out_b1, Fraction(cost))


# ---------------------------------------------------------------------------
# The multi-query session
# ---------------------------------------------------------------------------


class SimSession:
    """Stateful simulation of noiseless query access to x ~ mu_b given only a
    noisy oracle for b.

    Streaming phase: each new index is answered through the single-query
    simulator on marginals conditioned on the bits revealed so far (the
    conditioning excludes the bit being asked), and the Hellinger budget c
    is increased by h2 of those marginals.  Once c exceeds the cutoff, one
    full-bias call extracts b and all later queries are sampled directly
    from mu_b conditioned on the revealed bits.  Repeat queries replay the
    stored answer at zero cost.
    """

    def __init__(
        self,
        mu0: FiniteDist,
        mu1: FiniteDist,
        bit_oracle,
        rng,
        cutoff: float = 1.0,
        trace: bool = False,
    ):
        self.mu0 = mu0
        self.mu1 = mu1
        self.oracle = bit_oracle
        self.rng = rng
        self.cutoff = cutoff
        n = len(next(iter(mu0.p)))
        self.z: list = [None] * n
        self.c = 0.0
        self.phase = "streaming"
        self.b_value: Optional[int] = None
        self.trace: Optional[list] = [] if trace else None

    def answer(self, i: int) -> int:
        if self.z[i] is not None:
            return self.z[i]
        if self.phase == "streaming":
            out = self._answer_streaming(i)
        else:
            out = self._answer_post_cutoff(i)
        return out

    def _answer_streaming(self, i: int) -> int:
        q0, q1 = _cond_bit_probs(self.mu0, self.mu1, self.z, i)
        q0f, q1f = float(q0), float(q1)
        a = _argmin_outcome(q0f, q1f)
        p0 = q0f if a == 1 else 1 - q0f
        p1 = q1f if a == 1 else 1 - q1f
        before = self.oracle.oracle.ledger.total_float() if isinstance(
            self.oracle, BitOracle
        ) else None
        out = single_bit_sim(p0, p1, a, self.oracle, self.rng)
        inc = hellinger_sq(FiniteDist.bernoulli(q0f), FiniteDist.bernoulli(q1f))
        self.z[i] = out
        self.c += inc
        tripped = self.c > self.cutoff
        if self.trace is not None:
            charged = None
            if before is not None:
                charged = self.oracle.oracle.ledger.total_float() - before
            self.trace.append(
                {
                    "index": i,
                    "a": a,
                    "p0": p0,
                    "p1": p1,
                    "cost": charged,
                    "c_after": self.c,
                    "phase": self.phase,
                }
            )
        if tripped:
            self.b_value = self.oracle.query(1)
            self.phase = "post-cutoff"
        return out

    def _answer_post_cutoff(self, i: int) -> int:
        mu_b = self.mu0 if self.b_value == 0 else self.mu1
        mu_cond = mu_b.condition(tuple(self.z))
        q = float(mu_cond.marginal(i))
        out = int(self.rng.random() < q)
        self.z[i] = out
        if self.trace is not None:
            self.trace.append(
                {
                    "index": i,
                    "a": None,
                    "p0": None,
                    "p1": None,
                    "cost": 0.0,
                    "c_after": self.c,
                    "phase": self.phase,
                }
            )
        return out

    def trace_json(self) -> str:
        if self.trace is None:
            raise ValueError("session was created without trace=True")
        return json.dumps(self.trace)


# ---------------------------------------------------------------------------
# Exact faithfulness interpreter
# ---------------------------------------------------------------------------


def _exact_answer_step(mu0, mu1, z, i, b):
    """Exact law of the session's next answer and its expected oracle cost.

    The streaming-phase law (derived from the simulator's branch measure) and
    the post-cutoff law (the conditioned marginal of mu_b) coincide exactly,
    so the answer-sequence distribution does not depend on where the cutoff
    lands; this function returns that common law.
    """
    q0, q1 = _cond_bit_probs(mu0, mu1, z, i)
    q0, q1 = Fraction(q0), Fraction(q1)
    a = _argmin_outcome(q0, q1)
    p0 = q0 if a == 1 else 1 - q0
    p1 = q1 if a == 1 else 1 - q1
    res = single_bit_sim_exact(p0, p1, a)
    out = res.out_b0 if b == 0 else res.out_b1
    # Streaming-phase law == mu_b^z|_i: checked here defensively.
    qb = q0 if b == 0 else q1
    assert out.get(1, Fraction(0)) == qb
    return out, res.expected_cost


def faithfulness_distributions(
    mu0: FiniteDist, mu1: FiniteDist, query_seq: Sequence[int], b: int
) -> tuple[FiniteDist, FiniteDist]:
    """Exact answer-sequence distributions (simulated, true oracle) for a
    fixed query sequence and hidden bit b; both as rational FiniteDists."""
    n = len(next(iter(mu0.p)))
    mu_b = mu0 if b == 0 else mu1

    sim_acc: dict = {}

    def rec(z: list, t: int, answers: tuple, weight: Fraction):
        if weight == 0:
            return
        if t == len(query_seq):
            sim_acc[answers] = sim_acc.get(answers, Fraction(0)) + weight
            return
        i = query_seq[t]
        if z[i] is not None:
            rec(z, t + 1, answers + (z[i],), weight)
            return
        out, _cost = _exact_answer_step(mu0, mu1, z, i, b)
        for bit, pr in out.items():
            if pr == 0:
                continue
            z2 = list(z)
            z2[i] = bit
            rec(z2, t + 1, answers + (bit,), weight * pr)

    rec([None] * n, 0, (), Fraction(1))
    sim_dist = FiniteDist(sim_acc)

    true_acc: dict = {}
    for x, v in mu_b.p.items():
        answers = tuple(x[i] for i in query_seq)
        true_acc[answers] = true_acc.get(answers, Fraction(0)) + v
    return sim_dist, FiniteDist(true_acc)


def session_expected_cost_exact(
    mu0: FiniteDist, mu1: FiniteDist, query_seq: Sequence[int], b: int
) -> Fraction:
    """Exact expected streaming-phase oracle cost of a session run on a fixed
    query sequence under hidden bit b, ignoring the cutoff (valid whenever the
    budget never trips; each answered query contributes exactly
    (p0-p1)^2/(p0+p1))."""
    n = len(next(iter(mu0.p)))
    total = Fraction(0)

    def rec(z, t, weight):
        nonlocal total
        if weight == 0 or t == len(query_seq):
            return
        i = query_seq[t]
        if z[i] is not None:
            rec(z, t + 1, weight)
            return
        out, cost = _exact_answer_step(mu0, mu1, z, i, b)
        total += weight * cost
        for bit, pr in out.items():
            if pr == 0:
                continue
            z2 = list(z)
            z2[i] = bit
            rec(z2, t + 1, weight * pr)

    rec([None] * n, 0, Fraction(1))
    return total


# ---------------------------------------------------------------------------
# Session cost sweep machinery (compiled node tables + vectorized Monte Carlo)
# ---------------------------------------------------------------------------


@dataclass
class _NodeRow:
    a_bit: int
    p_take_a: tuple[float, float]  # per hidden bit b
    s_thresh: float
    cost_if_fired: float
    cost_fixed: float
    child0: int
    child1: int


def compile_session_nodes(tree: Tree, mu0: FiniteDist, mu1: FiniteDist, cutoff=1.0):
    """Flatten a decision tree into per-node sampling rows for fast session
    simulation.  The Hellinger budget c is a deterministic function of the
    path, so streaming/post-cutoff phase and the gamma=1 trip charge are
    precomputed per node."""
    rows: list[_NodeRow] = []

    def rec(node, z, c_before: float, post: bool) -> int:
        if isinstance(node, Leaf):
            return -1
        i = node.index
        try:
            q0, q1 = _cond_bit_probs(mu0, mu1, z, i)
            q0, q1 = float(q0), float(q1)
        except ZeroMassCondition:
            # Unreachable under either hidden bit; keep a harmless row.
            q0 = q1 = 0.5
        if not post:
            a = _argmin_outcome(q0, q1)
            p0 = q0 if a == 1 else 1 - q0
            p1 = q1 if a == 1 else 1 - q1
            s, gamma, _target, pa_b0, pa_b1, _cost = _branch_algebra(p0, p1)
            pa = (pa_b0, pa_b1)
            inc = hellinger_sq(FiniteDist.bernoulli(q0), FiniteDist.bernoulli(q1))
            c_after = c_before + inc
            trip = c_after > cutoff
            row = _NodeRow(
                a_bit=a,
                p_take_a=pa,
                s_thresh=s,
                cost_if_fired=gamma * gamma,
                cost_fixed=1.0 if trip else 0.0,
                child0=0,
                child1=0,
            )
            child_post = trip
        else:
            row = _NodeRow(
                a_bit=1,
                p_take_a=(q0, q1),
                s_thresh=1.0,
                cost_if_fired=0.0,
                cost_fixed=0.0,
                child0=0,
                child1=0,
            )
            c_after = c_before
            child_post = True
        rows.append(row)
        my_id = len(rows) - 1
        z0 = list(z)
        z0[i] = 0
        rows[my_id].child0 = rec(node.low, z0, c_after, child_post)
        z1 = list(z)
        z1[i] = 1
        rows[my_id].child1 = rec(node.high, z1, c_after, child_post)
        return my_id

    n = len(next(iter(mu0.p)))
    root = rec(tree, [None] * n, 0.0, False)
    return root, rows


def session_cost_mc(
    tree: Tree, mu0: FiniteDist, mu1: FiniteDist, b: int, trials: int, rng, cutoff=1.0
) -> float:
    """Monte Carlo mean oracle cost of a session answering the tree's queries
    under hidden bit b (vectorized over trials)."""
    root, rows = compile_session_nodes(tree, mu0, mu1, cutoff)
    if root == -1:
        return 0.0
    n_nodes = len(rows)
    p_take = np.array([r.p_take_a[b] for r in rows])
    s_thresh = np.array([r.s_thresh for r in rows])
    a_bits = np.array([r.a_bit for r in rows])
    cost_fired = np.array([r.cost_if_fired for r in rows])
    cost_fixed = np.array([r.cost_fixed for r in rows])
    child0 = np.array([r.child0 for r in rows])
    child1 = np.array([r.child1 for r in rows])

    node = np.full(trials, root, dtype=np.int64)
    total = np.zeros(trials)
    while True:
        active = node >= 0
        if not active.any():
            break
        idx = node[active]
        u = rng.random(int(active.sum()))
        take_a = u < p_take[idx]
        fired = u < s_thresh[idx]
        ans = np.where(take_a, a_bits[idx], 1 - a_bits[idx])
        total[active] += cost_fired[idx] * fired + cost_fixed[idx]
        node[active] = np.where(ans == 1, child1[idx], child0[idx])
    return float(total.mean())


def session_cost_expectation(
    tree: Tree, mu0: FiniteDist, mu1: FiniteDist, b: int, cutoff=1.0
) -> float:
    """Exact expected session cost under hidden bit b by path summation over
    the compiled node table (float arithmetic)."""
    root, rows = compile_session_nodes(tree, mu0, mu1, cutoff)

    def rec(idx: int, reach: float) -> float:
        if idx == -1 or reach == 0.0:
            return 0.0
        r = rows[idx]
        expected = reach * (r.s_thresh * r.cost_if_fired + r.cost_fixed)
        pa = r.p_take_a[b]
        p1 = pa if r.a_bit == 1 else 1 - pa
        return expected + rec(r.child1, reach * p1) + rec(r.child0, reach * (1 - p1))

    return rec(root, 1.0)


# ---------------------------------------------------------------------------
# Lifting a composed-function algorithm
# ---------------------------------------------------------------------------


def lift_composed_algorithm(
    alg: Union[Tree, RandomizedTree],
    mu0: FiniteDist,
    mu1: FiniteDist,
    y_oracle: NoisyOracle,
    inner_arity: int,
    rng,
) -> tuple[int, float]:
    """Run an algorithm for the composed function against one simulation
    session per inner copy, wired to the noisy oracle for the corresponding
    outer bit.  Returns (output, total noisy-oracle cost charged)."""
    if isinstance(alg, RandomizedTree):
        weights = [float(w) for w in alg.weights]
        pick = rng.generator.choice(len(alg.trees), p=np.array(weights) / sum(weights))
        tree = alg.trees[int(pick)]
    else:
        tree = alg
    sessions: dict[int, SimSession] = {}
    before = y_oracle.ledger.total_float()
    node = tree
    while isinstance(node, Node):
        copy_i, bit_j = divmod(node.index, inner_arity)
        if copy_i not in sessions:
            sessions[copy_i] = SimSession(mu0, mu1, BitOracle(y_oracle, copy_i), rng)
        ans = sessions[copy_i].answer(bit_j)
        node = node.high if ans else node.low
    return node.label, y_oracle.ledger.total_float() - before


def lifted_output_dist_exact(
    tree: Tree, mu0: FiniteDist, mu1: FiniteDist, y: Sequence[int]
) -> dict:
    """Exact output law of the lifted algorithm on outer input y (per-copy
    sessions propagated as measures)."""
    m = len(next(iter(mu0.p)))
    acc: dict = {}

    def rec(node, zs: dict, weight: Fraction):
        if weight == 0:
            return
        if isinstance(node, Leaf):
            acc[node.label] = acc.get(node.label, Fraction(0)) + weight
            return
        copy_i, bit_j = divmod(node.index, m)
        z = zs.get(copy_i, tuple([None] * m))
        if z[bit_j] is not None:
            rec(node.high if z[bit_j] else node.low, zs, weight)
            return
        out, _ = _exact_answer_step(mu0, mu1, list(z), bit_j, y[copy_i])
        for bit, pr in out.items():
            if pr == 0:
                continue
            z2 = list(z)
            z2[bit_j] = bit
            zs2 = dict(zs)
            zs2[copy_i] = tuple(z2)
            rec(node.high if bit else node.low, zs2, weight * pr)

    rec(tree, {}, Fraction(1))
    return acc


def direct_output_dist_exact(
    tree: Tree, mu0: FiniteDist, mu1: FiniteDist, y: Sequence[int]
) -> dict:
    """Output law of the same algorithm run on true samples x ~ mu_y."""
    factors = [mu0 if bit == 0 else mu1 for bit in y]
    mu_y = ProductDist(factors).explicit()
    acc: dict = {}
    for x, v in mu_y.p.items():
        out, _, _ = run_tree(tree, x)
        acc[out] = acc.get(out, Fraction(0)) + v
    return acc
