"""Double-open attacks, the MOE game, memento OT attacks and the distinguisher."""

import math

import numpy as np
import pytest

from amnesic import adversary as adv
from amnesic.hashing import sample_hash
from amnesic.protocol import run_amrot
from amnesic.quantum import SingleQubitMeasurement

COS2 = math.cos(math.pi / 8) ** 2
MOE = 0.5 + 1 / (2 * math.sqrt(2))

# exhaustive enumeration of the standard-basis attack at lambda 4, l 1
GOLDEN_STANDARD_L4 = 0.658203125


class TestConstants:
    def test_breidbart_value_is_moe_base(self):
        assert COS2 == pytest.approx(MOE, abs=1e-12)
        assert adv.BREIDBART_VALUE == pytest.approx(adv.MOE_BASE, abs=1e-12)

    def test_log_identity(self):
        assert math.log2(1 / MOE) == pytest.approx(math.log2(4 - 2 * math.sqrt(2)), abs=1e-12)


class TestDoubleOpen:
    def test_breidbart_single(self):
        v = adv.double_open_success_exact(adv.DoubleOpenStrategy.breidbart(), 1)
        assert v == pytest.approx(0.8535533906, abs=1e-9)

    def test_standard_fixed_t(self):
        assert adv.double_open_success_exact(adv.DoubleOpenStrategy.standard(0), 1) == 0.75

    def test_standard_fixed_t_by_sampling(self):
        rng = np.random.default_rng(0)
        n = 2**16
        a = rng.integers(0, 2, n)
        theta = rng.integers(0, 2, n)
        # H|a> measured in the standard basis gives a uniform bit
        s = np.where(theta == 0, a, rng.integers(0, 2, n))
        hits = np.where(theta == 0, s == a, a == 0)
        assert abs(hits.mean() - 0.75) < 3 * math.sqrt(0.75 * 0.25 / n)

    def test_breidbart_three_joint(self):
        s = adv.DoubleOpenStrategy.breidbart()
        exact = adv.double_open_success_exact(s, 3)
        assert exact == pytest.approx(COS2**3, abs=1e-12)
        assert adv.double_open_success_joint(s, 3) == pytest.approx(exact, abs=1e-12)

    def test_product_rule(self):
        ms = [
            SingleQubitMeasurement.breidbart(labels=((0, 0), (1, 1))),
            SingleQubitMeasurement.standard(labels=((0, 1), (1, 1))),
            SingleQubitMeasurement.hadamard(labels=((0, 0), (1, 1))),
            SingleQubitMeasurement.rotated(0.3, labels=((1, 0), (0, 1))),
        ]
        for lam in range(1, 5):
            mixed = adv.DoubleOpenStrategy(ms[:lam])
            prod = np.prod([adv.double_open_qubit_value(m) for m in ms[:lam]])
            assert adv.double_open_success_joint(mixed, lam) == pytest.approx(prod, abs=1e-12)

    def test_rejects_bad_labels(self):
        with pytest.raises(adv.StrategyError):
            adv.DoubleOpenStrategy(SingleQubitMeasurement.standard())

    def test_fine_search(self):
        res = adv.double_open_search(1, 0.001)
        assert res.qubit_value <= COS2 + 1e-6
        assert res.qubit_value >= COS2 - 1e-6
        again = adv.double_open_success_exact(res.strategy, 1)
        assert again == pytest.approx(res.qubit_value, abs=1e-12)

    def test_coarse_search(self):
        assert abs(adv.double_open_search(1, 0.1).qubit_value - COS2) < 0.01

    def test_degenerate_grid(self):
        assert adv.double_open_search(1, 4.0).qubit_value >= 0.75


class TestCheatingCommitters:
    def test_breidbart_double_open_rate(self):
        from amnesic.protocol import amflip_run
        n = 3000
        hits = sum(bool(amflip_run(np.random.default_rng([1, t]), np.random.default_rng([2, t]),
                                   adversary=adv.BreidbartCommitter(0), lam=2).double_open)
                   for t in range(n))
        p = COS2**2
        assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


class TestMoe:
    def test_breidbart_memento_single(self):
        s = adv.moe_optimal_strategy(SingleQubitMeasurement.breidbart(), 1)
        assert adv.moe_game_value(s, 1) == pytest.approx(MOE, abs=1e-9)

    @pytest.mark.parametrize("lam", [1, 2, 3, 4])
    def test_bound_over_memento_class(self, lam):
        ms = [SingleQubitMeasurement.rotated(k * math.pi / 16) for k in range(8)]
        ms += [SingleQubitMeasurement.bb84_four()]
        for m in ms:
            v = adv.moe_game_value(adv.moe_optimal_strategy(m, lam), lam)
            assert v <= MOE**lam + 1e-9

    def test_constant_response(self):
        s = adv.MoeStrategy(SingleQubitMeasurement.standard(), lambda w, theta: (0, 0))
        assert adv.moe_game_value(s, 2) == pytest.approx(0.25, abs=1e-12)

    def test_non_identical_copies_rejected(self):
        s = adv.MoeStrategy(SingleQubitMeasurement.standard(), lambda w, t: (0,),
                            charlie=lambda w, t: (1,))
        with pytest.raises(adv.StrategyError):
            adv.moe_game_value(s, 1)

    def test_dense_limit(self):
        s = adv.moe_optimal_strategy(SingleQubitMeasurement.standard(), 1)
        with pytest.raises(adv.StrategyError):
            adv.moe_game_value(s, 6)


class TestReduction:
    def test_standard_two_qubits(self):
        a = adv.builtin_attacks(2)["standard"]
        direct = adv.ot_joint_guess_probability(a, 2)
        assert adv.moe_game_value(adv.reduce_ot_attack_to_moe(a, 2), 2) == pytest.approx(
            direct, abs=1e-9)
        assert direct == pytest.approx(0.5625, abs=1e-12)

    def test_breidbart_single(self):
        a = adv.builtin_attacks(1)["breidbart"]
        assert adv.ot_joint_guess_probability(a, 1) == pytest.approx(MOE, abs=1e-9)
        assert adv.moe_game_value(adv.reduce_ot_attack_to_moe(a, 1), 1) == pytest.approx(
            MOE, abs=1e-9)

    def test_constant_guesser(self):
        a = adv.builtin_attacks(2)["constant"]
        direct = adv.ot_joint_guess_probability(a, 2)
        # only x = 00 is guessed: one consistent pair per basis pattern
        assert direct == pytest.approx(0.25, abs=1e-12)
        assert adv.moe_game_value(adv.reduce_ot_attack_to_moe(a, 2), 2) == pytest.approx(
            direct, abs=1e-9)

    def test_rejects_nondeterministic(self):
        a = adv.MomentoOtStrategy("coin", SingleQubitMeasurement.standard(),
                                  decode={0: 0, 1: 1}, deterministic=False)
        with pytest.raises(adv.StrategyError):
            adv.reduce_ot_attack_to_moe(a, 1)


class TestGuessing:
    def test_golden_standard(self):
        est = adv.ot_receiver_guess_probability(adv.builtin_attacks(4)["standard"], 4, 1)
        assert est.value == pytest.approx(GOLDEN_STANDARD_L4, abs=1e-12)
        assert est.mode == "exact" and est.ci_low == est.ci_high == est.value

    @pytest.mark.parametrize("ell", [1, 2, 3])
    def test_honest_as_attacker(self, ell):
        for lam in (2, 4):
            for b in (0, 1):
                est = adv.ot_receiver_guess_probability(adv.builtin_attacks(lam)[f"honest-{b}"],
                                                        lam, ell)
                assert est.value == pytest.approx(2.0**-ell, abs=1e-12)

    def test_monte_carlo_matches_exact(self):
        for name in ("standard", "breidbart", "bb84-four", "honest-0"):
            a = adv.builtin_attacks(4)[name]
            exact = adv.ot_receiver_guess_probability(a, 4, 1).value
            mc = adv.ot_receiver_guess_probability(a, 4, 1, "mc", 20000,
                                                   rng=np.random.default_rng(5))
            sigma = math.sqrt(exact * (1 - exact) / 20000)
            assert abs(mc.value - exact) <= 3 * sigma, name
            assert mc.ci_low <= mc.value <= mc.ci_high

    def test_sessions_match_exact(self):
        a = adv.builtin_attacks(3)["breidbart"]
        exact = adv.ot_receiver_guess_probability(a, 3, 1).value
        n = 3000
        wins = 0
        for t in range(n):
            out = run_amrot(3, 1, 0, np.random.default_rng([8, t]), receiver=a.as_receiver())
            g0, g1 = out.receiver_output
            wins += np.array_equal(g0, out.m0) and np.array_equal(g1, out.m1)
        assert abs(wins / n - exact) <= 3 * math.sqrt(exact * (1 - exact) / n)

    def test_exact_limit(self):
        with pytest.raises(adv.StrategyError):
            adv.ot_receiver_guess_probability(adv.builtin_attacks(7)["standard"], 7, 1)

    def test_large_lambda_sampled(self):
        a = adv.builtin_attacks(40)["breidbart"]
        est = adv.ot_receiver_guess_probability(a, 40, 1, "mc", 20000,
                                                rng=np.random.default_rng(2))
        assert est.trials == 20000
        assert est.ci_high < 0.5 + 0.5

    def test_clopper_pearson(self):
        lo, hi = adv.clopper_pearson(0, 10)
        assert lo == 0 and 0 < hi < 0.31
        lo, hi = adv.clopper_pearson(10, 10)
        assert hi == 1 and 0.69 < lo < 1

    def test_record_fields(self):
        est = adv.ot_receiver_guess_probability(adv.builtin_attacks(2)["standard"], 2, 1)
        rec = adv.attack_record(est, 1.0)
        assert set(rec) == {"attack_id", "lambda", "ell", "mode", "value", "ci_low", "ci_high",
                            "bound", "seed"}


class TestDistinguisher:
    @pytest.mark.parametrize("c", [0, 1])
    def test_uniform_input(self, c):
        d = adv.build_distinguisher(adv.builtin_attacks(3)["breidbart"])
        assert d.acceptance_exact(3, 1, c, hashed=False) == pytest.approx(0.5, abs=1e-12)

    def test_hashed_breidbart(self):
        d = adv.build_distinguisher(adv.builtin_attacks(4)["breidbart"])
        assert d.acceptance_exact(4, 1, 0, hashed=True) >= 0.5

    def test_zero_advantage_attack(self):
        d = adv.build_distinguisher(adv.builtin_attacks(3)["honest-0"])
        assert abs(d.advantage_exact(3, 1, 1)) <= 1e-9

    def test_sampled_call_matches_exact(self):
        strategy = adv.builtin_attacks(2)["standard"]
        d = adv.build_distinguisher(strategy)
        exact = d.acceptance_exact(2, 1, 0, hashed=True)
        rng = np.random.default_rng(31)
        n = 6000
        acc = 0
        for _ in range(n):
            from amnesic.protocol import BB84Secret, restrict
            from amnesic.quantum import measure_product_povm, prepare_bb84
            s = BB84Secret.random(2, rng)
            w = measure_product_povm(prepare_bb84(s), strategy.per_qubit(2), rng)
            h = sample_hash(2, 1, rng)
            acc += d(h, h(restrict(s.a, s.theta, 0)), w, s.theta, 0, rng)
        assert abs(acc / n - exact) <= 3 * math.sqrt(exact * (1 - exact) / n)
