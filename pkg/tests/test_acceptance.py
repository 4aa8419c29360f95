"""
Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL ...`` line; run with
``pytest tests/test_acceptance.py -s`` to see them.
"""

import math
import time

import numpy as np
import pytest

from amnesic import adversary as adv
from amnesic.cli import main
from amnesic.infotheory import eq3_bound
from amnesic.protocol import BB84Secret, amflip_run, run_amcom, run_amrot
from amnesic.verify import binding_suite, lhl_suite, moe_suite, split_suite

COS2 = math.cos(math.pi / 8) ** 2
MOE = 0.5 + 1 / (2 * math.sqrt(2))

pytestmark = pytest.mark.slow


def report(n, ok, elapsed, budget, detail):
    ok = bool(ok) and elapsed < budget
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s of {budget}s) {detail}")
    assert ok, detail


def all_secrets(lam):
    for i in range(4**lam):
        a = np.array([(i >> (2 * lam - 1 - k)) & 1 for k in range(lam)], dtype=np.uint8)
        t = np.array([(i >> (lam - 1 - k)) & 1 for k in range(lam)], dtype=np.uint8)
        yield BB84Secret(a, t)


def zero_leak(commit, rot):
    return (commit.transcript.bytes_sent("committer->receiver", at="reveal") == 0
            and rot.transcript.bytes_sent("receiver->sender") == 0)


class TestAcceptance:
    def test_criterion_01_single_qubit_binding(self):
        t0 = time.perf_counter()
        exact = adv.double_open_success_exact(adv.DoubleOpenStrategy.breidbart(), 1)
        found = adv.double_open_search(1, 0.001)
        ok = abs(exact - 0.8535533906) <= 1e-9 and found.qubit_value <= exact + 1e-6
        report(1, ok, time.perf_counter() - t0, 30,
               f"exact={exact:.10f} best_on_grid={found.qubit_value:.10f}")

    def test_criterion_02_binding_decay(self):
        t0 = time.perf_counter()
        suite = binding_suite(seed=1, max_lambda=6)
        decay = [c for c in suite["checks"] if c["name"].startswith("decay")]
        worst = max(abs(c["best"] - COS2 ** c["lambda"]) for c in decay)
        ok = suite["passed"] and len(decay) == 6 and worst <= 1e-6
        report(2, ok, time.perf_counter() - t0, 60, f"max |best - cos^(2l)| = {worst:.2e}")

    def test_criterion_03_moe_bound(self):
        t0 = time.perf_counter()
        suite = moe_suite(seed=1, max_lambda=4)
        sweep = next(c for c in suite["checks"] if c["name"] == "lambda-1-sweep-bound")
        bounds = [c for c in suite["checks"] if c["name"].startswith("bound-lambda")]
        ok = (all(c["passed"] for c in bounds) and len(bounds) == 4 and sweep["passed"]
              and abs(sweep["best"] - MOE) <= 1e-6)
        table = " ".join(f"l{r['lambda']}:{r['best']:.6f}<={r['bound']:.6f}"
                         for r in suite["table"])
        report(3, ok, time.perf_counter() - t0, 120, table)

    def test_criterion_04_reduction_soundness(self):
        t0 = time.perf_counter()
        worst = 0.0
        count = 0
        for lam in range(1, 5):
            for attack in adv.builtin_attacks(lam).values():
                direct = adv.ot_joint_guess_probability(attack, lam)
                via = adv.moe_game_value(adv.reduce_ot_attack_to_moe(attack, lam), lam)
                worst = max(worst, abs(direct - via))
                count += 1
        report(4, worst <= 1e-9, time.perf_counter() - t0, 60,
               f"{count} attack/lambda pairs, max discrepancy {worst:.1e}")

    def test_criterion_05_completeness(self):
        t0 = time.perf_counter()
        runs = 0
        ok = True
        for lam in range(1, 7):
            for i, s in enumerate(all_secrets(lam)):
                for b in (0, 1):
                    rng = np.random.default_rng([5, lam, i, b])
                    ok &= run_amcom(lam, b, rng, secret=s).verdict == b
                    r = run_amrot(lam, 2, b, rng, secret=s)
                    ok &= np.array_equal(r.receiver_output, r.m1 if b else r.m0)
                    runs += 1
        for t in range(10**4):
            rng = np.random.default_rng([5, 16, t])
            b = t % 2
            ok &= run_amcom(16, b, rng).verdict == b
            r = run_amrot(16, 2, b, rng)
            ok &= np.array_equal(r.receiver_output, r.m1 if b else r.m0)
            runs += 1
        report(5, ok, time.perf_counter() - t0, 60, f"{runs} commit and {runs} ROT sessions")

    def test_criterion_06_structural_security(self):
        t0 = time.perf_counter()
        committers = [lambda b: None, adv.BreidbartCommitter, adv.StallHolderCommitter]
        attacks = ["honest", *sorted(adv.builtin_attacks(8))]
        transcripts = 0
        ok = True
        for t in range(5000):
            rng = np.random.default_rng([6, t])
            b = t % 2
            committer = committers[t % len(committers)](b)
            name = attacks[t % len(attacks)]
            receiver = None if name == "honest" else adv.builtin_attacks(8)[name].as_receiver()
            c = run_amcom(8, b, rng, committer=committer)
            r = run_amrot(8, 1, b, rng, receiver=receiver)
            ok &= zero_leak(c, r)
            transcripts += 2
        report(6, ok and transcripts >= 10**4, time.perf_counter() - t0, 60,
               f"{transcripts} transcripts, zero leaking bytes: {ok}")

    def test_criterion_07_coin_flip(self):
        t0 = time.perf_counter()
        uniform = True
        for lam in (1, 4, 8, 16):
            for bob_bit in (0, 1):
                outs = sorted(amflip_run(np.random.default_rng([7, a]),
                                         np.random.default_rng([7, 2 + a]), lam=lam,
                                         alice_bit=a, bob_bit=bob_bit).c_bob for a in (0, 1))
                uniform &= outs == [0, 1]
        n = 10**5
        hits = 0
        for t in range(n):
            out = amflip_run(np.random.default_rng([7, 10, t]), np.random.default_rng([7, 11, t]),
                             adversary=adv.BreidbartCommitter(0), lam=8)
            hits += bool(out.double_open)
        p = COS2**8
        rate = hits / n
        limit = p + 3 * math.sqrt(p * (1 - p) / n)
        report(7, uniform and rate <= limit, time.perf_counter() - t0, 120,
               f"bob-side exact uniform={uniform}; steering rate {rate:.5f} <= {limit:.5f}")

    def test_criterion_08_min_entropy_splitting(self):
        t0 = time.perf_counter()
        suite = split_suite(seed=1, count=200, deltas=(0.25, 0.125))
        meets, exhaustive = suite["checks"]
        report(8, suite["passed"], time.perf_counter() - t0, 180,
               f"failures={meets['failures']} min_slack={meets['min_slack']:.4f} "
               f"exhaustively_checked={exhaustive['exhaustive_instances']}")

    def test_criterion_09_leftover_hash(self):
        t0 = time.perf_counter()
        suite = lhl_suite(seed=1, count=100)
        check = suite["checks"][0]
        report(9, suite["passed"] and check["held"] == 100, time.perf_counter() - t0, 180,
               f"{check['held']}/{check['instances']} hold")

    def test_criterion_10_ot_bound_consistency(self):
        t0 = time.perf_counter()
        worst = -math.inf
        ok = True
        count = 0
        for lam in (40, 60):
            bound = eq3_bound(lam, 1)
            for i, (name, attack) in enumerate(sorted(adv.builtin_attacks(lam).items())):
                est = adv.ot_receiver_guess_probability(attack, lam, 1, "mc", 10**5,
                                                        rng=np.random.default_rng([10, lam, i]))
                upper = est.ci_high - 0.5
                ok &= upper < bound
                worst = max(worst, upper - bound)
                count += 1
        report(10, ok, time.perf_counter() - t0, 300,
               f"{count} attacks, max (upper95 - bound) = {worst:.4f}")

    def test_criterion_11_determinism(self, tmp_path):
        t0 = time.perf_counter()
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        codes = [main(["verify", "all", "--seed", "1", "--out", str(p)], environ={})
                 for p in paths]
        same = paths[0].read_bytes() == paths[1].read_bytes()
        report(11, same and codes == [0, 0], time.perf_counter() - t0, 600,
               f"exit codes {codes}, byte-identical={same}")
