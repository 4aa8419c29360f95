"""
Verification suites behind ``amnesic verify``.

Each suite returns a JSON-ready dict ``{"suite", "passed", "checks": [...]}``
whose content depends only on the seed, so reports are byte-reproducible.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import adversary as adv
from .infotheory import (eq3_bound, lhl_verify, min_entropy_split, random_table,
                         JointDistribution)
from .protocol import BB84Secret, amflip_run, run_amcom, run_amrot
from .quantum import SingleQubitMeasurement

SUITES = ("binding", "moe", "split", "lhl", "ot", "protocol")
BIND_TOL = 1e-9
SEARCH_TOL = 1e-6
MOE_TOL = 1e-9


def _check(name: str, passed: bool, **details) -> dict:
    return {"name": name, "passed": bool(passed), **details}


def _suite(name: str, checks: list[dict], **extra) -> dict:
    return {"suite": name, "passed": all(c["passed"] for c in checks), "checks": checks, **extra}


def _r(x: float) -> float:
    """Round for reports: stable across BLAS summation order."""
    return float(f"{x:.12g}")


def binding_suite(seed: int = 1, max_lambda: int = 6, joint_max_lambda: int = 4,
                  step: float = 0.001) -> dict:
    target = adv.BREIDBART_VALUE
    checks = []
    exact = adv.double_open_success_exact(adv.DoubleOpenStrategy.breidbart(), 1)
    checks.append(_check("breidbart-exact", abs(exact - target) <= BIND_TOL,
                         value=_r(exact), expected=_r(target)))
    found = adv.double_open_search(1, step)
    checks.append(_check("search-no-violation", found.qubit_value <= target + SEARCH_TOL,
                         value=_r(found.qubit_value), bound=_r(target), grid_step=step,
                         points=found.points))
    checks.append(_check("search-attains", found.qubit_value >= target - SEARCH_TOL,
                         value=_r(found.qubit_value)))
    for lam in range(1, max_lambda + 1):
        best = found.qubit_value**lam
        expected = target**lam
        row = {"lambda": lam, "best": _r(best), "expected": _r(expected)}
        ok = abs(best - expected) <= SEARCH_TOL
        if lam <= joint_max_lambda:
            joint = adv.double_open_success_joint(found.strategy, lam)
            row["joint"] = _r(joint)
            ok = ok and abs(joint - best) <= BIND_TOL
        checks.append(_check(f"decay-lambda-{lam}", ok, **row))
    return _suite("binding", checks)


def moe_strategies(lam: int) -> dict[str, adv.MoeStrategy]:
    """Memento-class strategies evaluated at ``lam``."""
    out = {}
    for k in range(8):
        angle = k * math.pi / 16
        out[f"rotated-{k}pi/16"] = adv.moe_optimal_strategy(
            SingleQubitMeasurement.rotated(angle), lam)
    out["bb84-four"] = adv.moe_optimal_strategy(SingleQubitMeasurement.bb84_four(), lam)
    mixed = [SingleQubitMeasurement.breidbart() if i % 2 == 0 else SingleQubitMeasurement.standard()
             for i in range(lam)]
    out["mixed-breidbart-standard"] = adv.moe_optimal_strategy(mixed, lam)
    for name, attack in adv.builtin_attacks(lam).items():
        out[f"reduced-{name}"] = adv.reduce_ot_attack_to_moe(attack, lam)
    return out


def moe_suite(seed: int = 1, max_lambda: int = 4, sweep_step: float = 0.001) -> dict:
    checks = []
    table = []
    best1, best_angle = -1.0, 0.0
    angles = np.arange(0, math.pi / 2 + 1e-12, sweep_step)
    for angle in angles:
        strategy = adv.moe_optimal_strategy(SingleQubitMeasurement.rotated(angle), 1)
        v = adv.moe_game_value(strategy, 1)
        if v > best1:
            best1, best_angle = v, float(angle)
    bound1 = adv.MOE_BASE
    checks.append(_check("lambda-1-sweep-bound", best1 <= bound1 + MOE_TOL,
                         best=_r(best1), bound=_r(bound1), angle=_r(best_angle),
                         points=int(angles.size)))
    checks.append(_check("lambda-1-attains", abs(best1 - bound1) <= SEARCH_TOL, best=_r(best1)))
    for lam in range(1, max_lambda + 1):
        bound = adv.MOE_BASE**lam
        values = {name: adv.moe_game_value(s, lam) for name, s in moe_strategies(lam).items()}
        worst = max(values, key=values.get)
        ok = all(v <= bound + MOE_TOL for v in values.values())
        table.append({"lambda": lam, "best": _r(values[worst]), "best_strategy": worst,
                      "bound": _r(bound), "strategies": len(values)})
        checks.append(_check(f"bound-lambda-{lam}", ok, best=_r(values[worst]), bound=_r(bound),
                             best_strategy=worst))
    for lam in range(1, max_lambda + 1):
        worst = 0.0
        for attack in adv.builtin_attacks(lam).values():
            direct = adv.ot_joint_guess_probability(attack, lam)
            via = adv.moe_game_value(adv.reduce_ot_attack_to_moe(attack, lam), lam)
            worst = max(worst, abs(direct - via))
        checks.append(_check(f"reduction-lambda-{lam}", worst <= MOE_TOL,
                             max_discrepancy=_r(float(worst))))
    return _suite("moe", checks, table=table)


def split_instances(seed: int, count: int = 200):
    rng = np.random.default_rng([seed, 8])
    for _ in range(count):
        sizes = (int(rng.integers(2, 5)), int(rng.integers(2, 5)), int(rng.integers(1, 5)))
        sparsity = float(rng.choice([0.0, 0.3, 0.6, 0.8]))
        yield random_table(rng, ("X0", "X1", "Z"), sizes, sparsity)


def split_suite(seed: int = 1, count: int = 200, deltas=(0.25, 0.125)) -> dict:
    failures = 0
    exhaustive = 0
    exhaustive_bad = 0
    min_slack = math.inf
    for d in split_instances(seed, count):
        for delta in deltas:
            res = min_entropy_split(d, delta)
            failures += not res.holds
            min_slack = min(min_slack, res.achieved - res.bound)
            if res.exhaustive_best is not None:
                exhaustive += 1
                exhaustive_bad += res.exhaustive_best < res.achieved - 1e-9
    checks = [
        _check("constructed-split-meets-bound", failures == 0, instances=count,
               deltas=list(deltas), failures=failures, min_slack=_r(min_slack)),
        _check("exhaustive-confirms", exhaustive_bad == 0, exhaustive_instances=exhaustive),
    ]
    return _suite("split", checks)


def lhl_instances(seed: int, count: int = 100):
    rng = np.random.default_rng([seed, 9])
    for _ in range(count):
        n = int(rng.integers(2, 7))
        ell = int(rng.integers(1, 4))
        strings = [s for k in range(n + 1) for s in itertools.product((0, 1), repeat=k)]
        size = int(rng.integers(2, min(len(strings), 32) + 1))
        picks = sorted(rng.choice(len(strings), size=size, replace=False))
        xs = ["".join(map(str, strings[i])) for i in picks]
        ny = int(rng.integers(1, 5))
        raw = rng.exponential(size=(size, ny)) ** 3
        raw /= raw.sum()
        delta = float(rng.choice([0.0, 1 / 16, 1 / 8]))
        yield JointDistribution(("X", "Y"), (tuple(xs), tuple(range(ny))), raw), n, ell, delta


def lhl_suite(seed: int = 1, count: int = 100) -> dict:
    held = 0
    worst_ratio = 0.0
    for d, n, ell, delta in lhl_instances(seed, count):
        rep = lhl_verify(d, n, ell, delta)
        held += rep.holds
        worst_ratio = max(worst_ratio, rep.lhs / rep.rhs)
    checks = [_check("lhl-holds", held == count, held=held, instances=count,
                     worst_lhs_over_rhs=_r(worst_ratio))]
    return _suite("lhl", checks)


def ot_suite(seed: int = 1, lambdas=(40, 60), ell: int = 1, trials: int = 10**5) -> dict:
    checks = []
    for lam in lambdas:
        bound = eq3_bound(lam, ell)
        for i, (name, attack) in enumerate(sorted(adv.builtin_attacks(lam).items())):
            est = adv.ot_receiver_guess_probability(attack, lam, ell, "mc", trials,
                                                    rng=np.random.default_rng([seed, lam, i]),
                                                    seed=seed)
            upper = est.ci_high - 2.0**-ell
            checks.append(_check(f"ot-bound-{name}-lambda-{lam}", upper < bound, estimate=_r(est.value),
                                 advantage_upper_95=_r(upper), bound=_r(bound)))
    return _suite("ot", checks)


def protocol_suite(seed: int = 1, exhaustive_max: int = 6, sampled_lambda: int = 16,
                   trials: int = 10**4, cheat_trials: int = 2 * 10**4) -> dict:
    checks = []
    commit_ok = rot_ok = structural_ok = True
    runs = 0
    for lam in range(1, exhaustive_max + 1):
        for i, secret in enumerate(_secrets(lam)):
            for b in (0, 1):
                rng = np.random.default_rng([seed, lam, i, b])
                c = run_amcom(lam, b, rng, secret=secret)
                r = run_amrot(lam, 2, b, rng, secret=secret)
                commit_ok &= c.verdict == b
                rot_ok &= np.array_equal(r.receiver_output, r.m1 if b else r.m0)
                structural_ok &= _structural(c, r)
                runs += 1
    for t in range(trials):
        rng = np.random.default_rng([seed, 16, t])
        b = t % 2
        c = run_amcom(sampled_lambda, b, rng)
        r = run_amrot(sampled_lambda, 2, b, rng)
        commit_ok &= c.verdict == b
        rot_ok &= np.array_equal(r.receiver_output, r.m1 if b else r.m0)
        structural_ok &= _structural(c, r)
        runs += 1
    checks.append(_check("amcom-complete", commit_ok, runs=runs))
    checks.append(_check("amrot-complete", rot_ok, runs=runs))
    checks.append(_check("structural-zero-bytes", structural_ok, transcripts=2 * runs))

    ones = 0
    agree = True
    for t in range(trials):
        c_a, c_b, _ = amflip_run(np.random.default_rng([seed, 1, t]),
                                 np.random.default_rng([seed, 2, t]))
        agree &= c_a == c_b
        ones += c_a == 1
    bias = abs(ones / trials - 0.5)
    checks.append(_check("flip-honest", agree and bias < 3 * 0.5 / math.sqrt(trials),
                         trials=trials, bias=_r(bias)))
    perfect = True
    for bob_bit in (0, 1):
        outs = [amflip_run(np.random.default_rng([seed, 3, a]), np.random.default_rng([seed, 4, a]),
                           alice_bit=a, bob_bit=bob_bit).c_bob for a in (0, 1)]
        perfect &= sorted(outs) == [0, 1]
    checks.append(_check("flip-bob-perfect", perfect))
    doubles = 0
    for t in range(cheat_trials):
        out = amflip_run(np.random.default_rng([seed, 5, t]), np.random.default_rng([seed, 6, t]),
                         adversary=adv.BreidbartCommitter(0), lam=8)
        doubles += bool(out.double_open)
    p = adv.BREIDBART_VALUE**8
    sigma = math.sqrt(p * (1 - p) / cheat_trials)
    rate = doubles / cheat_trials
    checks.append(_check("flip-alice-breidbart", rate <= p + 3 * sigma, rate=_r(rate),
                         predicted=_r(p), trials=cheat_trials))
    return _suite("protocol", checks)


def _secrets(lam: int):
    for a in itertools.product((0, 1), repeat=lam):
        for t in itertools.product((0, 1), repeat=lam):
            yield BB84Secret(np.array(a, dtype=np.uint8), np.array(t, dtype=np.uint8))


def _structural(commit, rot) -> bool:
    hiding = commit.transcript.bytes_sent("committer->receiver", at="reveal") == 0
    sender_safe = rot.transcript.bytes_sent("receiver->sender") == 0
    consistent = (commit.transcript.recount() == commit.transcript.classical_bytes
                  and rot.transcript.recount() == rot.transcript.classical_bytes)
    return hiding and sender_safe and consistent


RUNNERS = {
    "binding": binding_suite,
    "moe": moe_suite,
    "split": split_suite,
    "lhl": lhl_suite,
    "ot": ot_suite,
    "protocol": protocol_suite,
}


def run_suites(name: str, seed: int = 1) -> list[dict]:
    names = SUITES if name == "all" else (name,)
    if any(n not in RUNNERS for n in names):
        raise ValueError(f"unknown suite {name!r}")
    return [RUNNERS[n](seed=seed) for n in names]
