import math
from fractions import Fraction

import pytest

from noisyquerylab.noisy import (
    BitOracle,
    CostLedger,
    NoisyOracle,
    amplified_bias,
    amplify_bounds_ok,
    call_log_csv,
    degrade,
    degrade_flip_prob,
    majority_bias_sweep,
    simulate_bias_via,
    smallest_amplifying_k,
    to_fraction,
)
from noisyquerylab.stats import RngStream, binom_pmf_exact, chi_square_gof, wilson_ci


class TestQuery:
    def test_full_bias_always_correct(self, rng):
        oracle = NoisyOracle((1, 0, 1), rng)
        assert all(oracle.query(0, 1) == 1 for _ in range(50))
        assert all(oracle.query(1, 1) == 0 for _ in range(50))
        assert oracle.ledger.total == 100

    def test_zero_bias_fair_coin_zero_cost(self, rng):
        oracle = NoisyOracle((1,), rng)
        hits = sum(oracle.query(0, 0) for _ in range(20000))
        assert oracle.ledger.total == 0
        lo, hi = wilson_ci(hits, 20000, 0.99)
        assert lo <= 0.5 <= hi

    def test_half_bias_frequency(self, rng):
        # Pr[answer = 1] = 0.75 for hidden bit 1 at gamma = 0.5.
        oracle = NoisyOracle((1,), rng)
        n = 10**6
        hits = sum(oracle.query(0, 0.5) for _ in range(n))
        lo, hi = wilson_ci(hits, n, 0.999)
        assert lo <= 0.75 <= hi

    def test_gamma_range_enforced(self, rng):
        oracle = NoisyOracle((1,), rng)
        with pytest.raises(ValueError):
            oracle.query(0, 1.5)
        with pytest.raises(ValueError):
            oracle.query(0, -0.1)

    def test_lazy_hidden_input(self, rng):
        class Lazy:
            def bit(self, i):
                return i % 2

        oracle = NoisyOracle(Lazy(), rng)
        assert oracle.query(3, 1) == 1
        assert oracle.query(2, 1) == 0


class TestLedger:
    def test_totals_exact_for_rational_gammas(self, rng):
        oracle = NoisyOracle((1, 1), rng, log_calls=True)
        gammas = [Fraction(1, 3), Fraction(1, 7), Fraction(2, 5), Fraction(1)]
        for i, g in enumerate(gammas):
            oracle.query(i % 2, g)
        assert oracle.ledger.total == sum(g * g for g in gammas)
        assert oracle.ledger.per_index[0] == Fraction(1, 9) + Fraction(4, 25)

    def test_call_log_csv(self, rng):
        oracle = NoisyOracle((1,), rng, log_calls=True)
        oracle.query(0, 0.5)
        oracle.query(0, 1.0)
        text = call_log_csv([(0, oracle.ledger)])
        lines = text.strip().splitlines()
        assert lines[0] == "trial_id,index,gamma,answer,cumulative_cost"
        assert len(lines) == 3
        assert lines[2].split(",")[4] == repr(1.25)

    def test_log_required(self, rng):
        oracle = NoisyOracle((1,), rng)
        with pytest.raises(ValueError):
            call_log_csv([(0, oracle.ledger)])


class TestAmplifiedBias:
    def test_exact_value_k3(self):
        # Independent oracle: p^3 + 3 p^2 q with p = 3/5.
        p, q = Fraction(3, 5), Fraction(2, 5)
        maj = p**3 + 3 * p**2 * q
        assert amplified_bias(Fraction(1, 5), 3) == 2 * maj - 1 == Fraction(37, 125)

    def test_k1_identity(self):
        assert amplified_bias(Fraction(1, 7), 1) == Fraction(1, 7)

    def test_lemma_bounds_example(self):
        got = amplified_bias(Fraction(1, 10), 9)
        assert Fraction(1, 10) <= got <= Fraction(9, 10)

    def test_matches_direct_binomial_sum(self):
        for gamma in (Fraction(1, 10), Fraction(1, 4), Fraction(1, 3)):
            for k in (1, 3, 5, 7):
                p = (1 + gamma) / 2
                maj = sum(binom_pmf_exact(k, i, p) for i in range((k + 1) // 2, k + 1))
                assert amplified_bias(gamma, k) == 2 * maj - 1

    def test_preconditions(self):
        with pytest.raises(ValueError):
            amplified_bias(Fraction(1, 2), 3)  # |gamma| > 1/3
        with pytest.raises(ValueError):
            amplified_bias(Fraction(1, 10), 4)  # even k
        with pytest.raises(ValueError):
            amplified_bias(Fraction(1, 10), 101)  # k > 1/gamma^2

    def test_negative_gamma_sign(self):
        assert amplified_bias(Fraction(-1, 5), 3) == -Fraction(37, 125)

    def test_monotone_in_k(self):
        gamma = Fraction(1, 20)
        last = Fraction(0)
        for k, bias in majority_bias_sweep(gamma, 399):
            assert bias > last
            last = bias

    def test_bounds_on_grid(self):
        for num in (2, 10, 25, 33):
            gamma = Fraction(num, 100)
            kmax = int(1 / (gamma * gamma))
            for k, bias in majority_bias_sweep(gamma, kmax):
                assert amplify_bounds_ok(gamma, k, bias)


class TestDegrade:
    def test_identity_when_equal(self, rng):
        for _ in range(20):
            bit = int(rng.integers(0, 2))
            assert degrade(bit, Fraction(1, 3), Fraction(1, 3), rng) == bit

    def test_flip_prob_value(self):
        assert degrade_flip_prob(Fraction(1), Fraction(1, 2)) == Fraction(1, 4)

    def test_precondition(self):
        with pytest.raises(ValueError):
            degrade_flip_prob(Fraction(1, 4), Fraction(1, 2))

    def test_degraded_full_bias_matches_direct_query(self, rng):
        # degrade(gamma=1 oracle bit, 1 -> 0.5) must match query(gamma=0.5).
        n = 40000
        counts = [0, 0]
        oracle = NoisyOracle((1,), rng)
        for _ in range(n):
            counts[degrade(oracle.query(0, 1), Fraction(1), Fraction(1, 2), rng)] += 1
        direct = NoisyOracle((1,), rng.child("direct"))
        expected = [n * 0.25, n * 0.75]
        assert chi_square_gof(counts, expected) > 0.001
        counts2 = [0, 0]
        for _ in range(n):
            counts2[direct.query(0, 0.5)] += 1
        assert chi_square_gof(counts2, expected) > 0.001


class TestSimulateBiasVia:
    def test_passthrough(self, rng):
        oracle = NoisyOracle((1,), rng)
        simulate_bias_via(oracle, 0, Fraction(1, 10), Fraction(1, 10), rng)
        assert oracle.ledger.total == Fraction(1, 100)

    def test_amplify_then_degrade_path(self, rng):
        k, achieved = smallest_amplifying_k(Fraction(1, 10), Fraction(3, 10))
        # Independent scan over odd k.
        expected_k = None
        kk = 1
        while True:
            if amplified_bias(Fraction(1, 10), kk) >= Fraction(3, 10):
                expected_k = kk
                break
            kk += 2
        assert k == expected_k
        assert achieved >= Fraction(3, 10)

        oracle = NoisyOracle((1,), rng)
        simulate_bias_via(oracle, 0, Fraction(3, 10), Fraction(1, 10), rng)
        assert oracle.ledger.total == k * Fraction(1, 100)

    def test_high_bias_uses_full_call(self, rng):
        oracle = NoisyOracle((1,), rng)
        simulate_bias_via(oracle, 0, Fraction(2, 5), Fraction(1, 10), rng)
        assert oracle.ledger.total == 1

    def test_cost_ratio_bound(self, rng):
        # (k * base^2) / target^2 <= 81 across a (target, base) grid.
        for tnum in (5, 10, 20, 30):
            target = Fraction(tnum, 100)
            for bden in (2, 4, 8, 16):
                base = target / bden
                k, _ = smallest_amplifying_k(base, target)
                assert k * base * base / (target * target) <= 81

    def test_output_bias_exact_in_measure(self):
        # degrade cancels amplification overshoot: the composed bias equals
        # the target exactly.
        base, target = Fraction(1, 10), Fraction(3, 10)
        k, achieved = smallest_amplifying_k(base, target)
        flip = degrade_flip_prob(achieved, target)
        assert achieved * (1 - 2 * flip) == target

    def test_to_fraction_normalizes(self):
        from gmpy2 import mpq

        f = to_fraction(mpq(3, 7))
        assert f == Fraction(3, 7) and isinstance(f.numerator, int)
