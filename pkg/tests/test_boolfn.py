import itertools
import math
from fractions import Fraction

import pytest

from noisyquerylab.boolfn import (
    OUTSIDE_PROMISE,
    ApproxIndexInput,
    DenseSizeError,
    PartialFn,
    and_n,
    approx_near_radius,
    approxindex,
    bits_to_int,
    ceil_half_plus_sqrt,
    compose,
    consistent,
    ensure_dense_ok,
    floor_half_minus_sqrt,
    flip_block,
    function_zoo,
    gapmaj,
    gapmaj_levels,
    hamming_weight,
    int_to_bits,
    make_approxindex_input,
    or_n,
    parity_n,
    triv,
)
from noisyquerylab.stats import RngStream


def weight_input(m, w):
    return tuple([1] * w + [0] * (m - w))


class TestThresholdArithmetic:
    @pytest.mark.parametrize("m", [4, 9, 10, 16, 17, 49, 100, 101, 1000])
    @pytest.mark.parametrize("gap", [Fraction(1), Fraction(2), Fraction(1, 2)])
    def test_matches_float_off_boundary(self, m, gap):
        hi = m / 2 + float(gap) * math.sqrt(m)
        lo = m / 2 - float(gap) * math.sqrt(m)
        # Stay away from float-boundary ambiguity: these m values are safe.
        assert ceil_half_plus_sqrt(m, gap) == math.ceil(round(hi, 9))
        assert floor_half_minus_sqrt(m, gap) == math.floor(round(lo, 9))

    def test_exact_on_perfect_square(self):
        assert ceil_half_plus_sqrt(16, Fraction(1)) == 12
        assert floor_half_minus_sqrt(16, Fraction(1)) == 4
        assert ceil_half_plus_sqrt(100, Fraction(2)) == 70
        assert floor_half_minus_sqrt(100, Fraction(2)) == 30


class TestGapMaj:
    def test_weight70_is_one(self):
        g = gapmaj(100, Fraction(2))
        assert g.eval(weight_input(100, 70)) == 1

    def test_midpoint_outside(self):
        g = gapmaj(100, Fraction(2))
        assert g.eval(weight_input(100, 50)) is OUTSIDE_PROMISE

    def test_sqrt_gap_variant(self):
        g = gapmaj(16, Fraction(1))
        assert g.eval(weight_input(16, 12)) == 1
        assert g.eval(weight_input(16, 4)) == 0

    def test_partition_by_weight(self):
        # The three outcome classes partition {0,1}^m exactly by weight.
        g = gapmaj(16, Fraction(1))
        lo, hi = gapmaj_levels(16, Fraction(1))
        for w in range(17):
            x = weight_input(16, w)
            expected = 1 if w == hi else (0 if w == lo else OUTSIDE_PROMISE)
            assert g.eval(x) is expected or g.eval(x) == expected

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            gapmaj(4, Fraction(2))  # floor(2 - 4) < 0

    def test_eval_stable(self):
        g = gapmaj(16, Fraction(1))
        x = weight_input(16, 12)
        assert all(g.eval(x) == 1 for _ in range(5))


class TestApproxIndex:
    def test_near_radius_clamps_small_k(self):
        # k/2 - 2 sqrt(k log2 k) < 0 for every k <= 100: the exact address
        # is still promised to hold the value.
        for k in (4, 8, 16, 64):
            assert approx_near_radius(k) == 0

    def test_near_radius_unclamped_large_k(self):
        # First unclamped sizes: radius matches the float threshold.
        for k in (128, 256, 512):
            theta = k / 2 - 2 * math.sqrt(k * math.log2(k))
            assert approx_near_radius(k) == int(theta)

    def test_promise_instantiation(self):
        k = 8
        inp = make_approxindex_input(k, (0,) * k, 1)
        f = approxindex(k)
        assert f.eval(inp.materialize()) == 1

    def test_far_cell_violation(self):
        k = 8
        inp = make_approxindex_input(k, (0,) * k, 1)
        bits = list(inp.materialize())
        far = (1,) * k  # distance 8 > radius
        cell = bits_to_int(far)
        bits[k + 2 * cell], bits[k + 2 * cell + 1] = 0, 0  # imprint a 0
        assert approxindex(k).eval(tuple(bits)) is OUTSIDE_PROMISE

    def test_zero_value(self):
        k = 8
        inp = make_approxindex_input(k, (1, 0) * 4, 0)
        assert approxindex(k).eval(inp.materialize()) == 0

    def test_probe_examples(self):
        inp = make_approxindex_input(8, (0,) * 8, 1)
        assert inp.probe_cell((0,) * 8) == 1
        assert inp.probe_cell((1,) * 8) == 2
        assert inp.probe_index(3) == 0

    @pytest.mark.parametrize("k", [8, 10, 12])
    def test_lazy_inputs_satisfy_promise(self, k):
        rng = RngStream(11, "promise", k)
        f = approxindex(k)
        for _ in range(3):
            a = tuple(int(b) for b in rng.integers(0, 2, size=k))
            value = int(rng.integers(0, 2))
            inp = make_approxindex_input(k, a, value)
            assert f.eval(inp.materialize()) == value

    def test_k16_materialization_passes_promise(self):
        rng = RngStream(12, "promise16")
        a = tuple(int(b) for b in rng.integers(0, 2, size=16))
        inp = make_approxindex_input(16, a, 1)
        assert approxindex(16).eval(inp.materialize()) == 1

    def test_boolean_view_consistency(self):
        inp = make_approxindex_input(8, (0, 1) * 4, 1)
        dense = inp.materialize()
        for p in list(range(8)) + [8, 9, 100, 101, len(dense) - 1]:
            assert inp.bit(p) == dense[p]


class TestCompose:
    def test_triv_gapmaj_both_high(self):
        f = compose(triv(2), gapmaj(16, Fraction(1)))
        x = weight_input(16, 12) + weight_input(16, 12)
        assert f.eval(x) == 1

    def test_triv_gapmaj_mixed_outside(self):
        f = compose(triv(2), gapmaj(16, Fraction(1)))
        x = weight_input(16, 12) + weight_input(16, 4)
        assert f.eval(x) is OUTSIDE_PROMISE

    def test_or_gapmaj(self):
        f = compose(or_n(2), gapmaj(16, Fraction(1)))
        x = weight_input(16, 4) + weight_input(16, 12)
        assert f.eval(x) == 1

    def test_agreement_with_inner_values(self):
        # compose(f, g) on blockwise promise inputs == f of the g-values,
        # exhaustively at arity(f) * arity(g) = 16.
        g = gapmaj(8, Fraction(1))
        f = or_n(2)
        fg = compose(f, g)
        blocks = [x for x in itertools.product((0, 1), repeat=8)
                  if g.eval(x) is not OUTSIDE_PROMISE]
        for xa in blocks:
            for xb in blocks:
                inner = (g.eval(xa), g.eval(xb))
                assert fg.eval(xa + xb) == f.eval(inner)


class TestFixtures:
    def test_triv(self):
        t = triv(3)
        assert t.eval((1, 1, 1)) == 1
        assert t.eval((0, 0, 0)) == 0
        assert t.eval((1, 0, 1)) is OUTSIDE_PROMISE

    def test_or_and_parity(self):
        assert or_n(2).eval((0, 0)) == 0
        assert and_n(2).eval((1, 1)) == 1
        assert parity_n(3).eval((1, 1, 0)) == 0

    def test_zoo(self):
        g = function_zoo("gapmaj:m=100,gap=2")
        assert g.arity == 100
        assert g.eval(weight_input(100, 70)) == 1
        assert function_zoo("triv:n=3").eval((1, 1, 1)) == 1
        with pytest.raises(ValueError):
            function_zoo("nosuch:n=3")
        with pytest.raises(ValueError):
            function_zoo("gapmaj:m")

    def test_dense_limit(self):
        ensure_dense_ok(2**20)
        with pytest.raises(DenseSizeError):
            ensure_dense_ok(2**20 + 1)

    def test_helpers(self):
        assert hamming_weight((1, 0, 1, 1)) == 3
        assert flip_block((1, 0, 1), (0, 2)) == (0, 0, 0)
        assert consistent((1, None), (1, 0))
        assert not consistent((1, 0), (1, 1))
        assert int_to_bits(5, 4) == (0, 1, 0, 1)
        assert bits_to_int((0, 1, 0, 1)) == 5
