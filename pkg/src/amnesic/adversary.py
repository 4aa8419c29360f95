"""
Attacks and exact evaluators.

* Double-open attacks on AmCom: a product single-qubit measurement whose
  outcome labels are pairs ``(s, t)``, the guessed standard-basis and
  Hadamard-basis values of each qubit.
* The monogamy-of-entanglement (MOE) game, restricted to measure-and-copy
  strategies on the D half of ``lam`` Bell pairs, evaluated on the actual
  ``2 lam``-qubit entangled state.
* Memento attacks on AmROT: a pre-stall product measurement yielding the
  memento ``w``, then a deterministic guesser of the raw strings
  ``(x0, x1)`` and of the outputs ``(m0, m1)``.
* The reduction from a memento attack to an MOE strategy, and the
  hash-vs-uniform distinguisher built from a memento attack.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.stats import beta

from .hashing import (HashDescriptor, eval_hash, hash_table, padded_length, sample_hash,
                      seed_length, length_field_width)
from .protocol import Committer, RotReceiver, restrict
from .quantum import (BB84Secret, QuantumRegister, SingleQubitMeasurement,
                      all_secrets, as_bits, basis_state, bell_pairs, measure_product_povm,
                      outcome_distribution, prepare_bb84)

BREIDBART_VALUE = math.cos(math.pi / 8) ** 2
MOE_BASE = 0.5 + 1 / (2 * math.sqrt(2))
EXACT_ATOM_LIMIT = 2**26


class StrategyError(ValueError):
    pass


def _per_qubit(measurement, lam: int) -> list[SingleQubitMeasurement]:
    if isinstance(measurement, SingleQubitMeasurement):
        return [measurement] * lam
    ms = list(measurement)
    if len(ms) != lam:
        raise StrategyError(f"{len(ms)} measurements for {lam} qubits")
    return ms


def single_qubit_table(meas: SingleQubitMeasurement) -> np.ndarray:
    """``P[a, theta, k]`` = probability of outcome index k on ``H^theta |a>``."""
    out = np.zeros((2, 2, len(meas.labels)))
    for a in (0, 1):
        for t in (0, 1):
            probs = meas.probabilities(basis_state(a, t))
            out[a, t] = [probs[lab] for lab in meas.labels]
    return out


# ---------------------------------------------------------------------------
# double opening
# ---------------------------------------------------------------------------

@dataclass
class DoubleOpenStrategy:
    """Per-qubit measurement with outcome labels ``(s, t)`` in {0,1}^2."""

    measurement: SingleQubitMeasurement | Sequence[SingleQubitMeasurement]

    def __post_init__(self):
        ms = ([self.measurement] if isinstance(self.measurement, SingleQubitMeasurement)
              else list(self.measurement))
        for m in ms:
            for lab in m.labels:
                if not (isinstance(lab, tuple) and len(lab) == 2 and set(lab) <= {0, 1}):
                    raise StrategyError(f"double-open label {lab!r} is not an (s, t) bit pair")

    def per_qubit(self, lam: int) -> list[SingleQubitMeasurement]:
        return _per_qubit(self.measurement, lam)

    @classmethod
    def breidbart(cls) -> "DoubleOpenStrategy":
        return cls(SingleQubitMeasurement.breidbart(labels=((0, 0), (1, 1))))

    @classmethod
    def standard(cls, t: int = 0) -> "DoubleOpenStrategy":
        """Measure in the standard basis, guess ``s`` = outcome, ``t`` fixed."""
        return cls(SingleQubitMeasurement.standard(labels=((0, t), (1, t))))


def _double_open_hit(label, a: int, theta: int) -> bool:
    s, t = label
    return (s if theta == 0 else t) == a


def double_open_qubit_value(meas: SingleQubitMeasurement) -> float:
    """Average over uniform ``(a, theta)`` of the basis-relevant guess being right."""
    total = 0.0
    for a in (0, 1):
        for t in (0, 1):
            probs = meas.probabilities(basis_state(a, t))
            total += sum(p for lab, p in probs.items() if _double_open_hit(lab, a, t))
    return total / 4


def double_open_success_exact(strategy: DoubleOpenStrategy, lam: int) -> float:
    """
    Probability that the committer holds ``sigma0`` consistent on
    ``{i: theta_i = 0}`` and ``sigma1`` consistent on ``{i: theta_i = 1}``.

    Product strategy on a product state: the per-qubit values multiply.
    """
    return float(np.prod([double_open_qubit_value(m) for m in strategy.per_qubit(lam)]))


def double_open_success_joint(strategy: DoubleOpenStrategy, lam: int) -> float:
    """Same quantity from the full ``lam``-qubit outcome tables (no factorization)."""
    ms = strategy.per_qubit(lam)
    total = 0.0
    for secret in all_secrets(lam):
        reg = QuantumRegister(prepare_bb84(secret).amplitudes)
        dist = outcome_distribution(reg, ms)
        for labels, p in dist.as_dict().items():
            hits = zip(labels, secret.a, secret.theta)
            if all(_double_open_hit(lab, a, t) for lab, a, t in hits):
                total += p
    return total / 4**lam


@dataclass
class SearchResult:
    value: float            # best per-qubit value raised to lam
    qubit_value: float
    polar: float
    azimuth: float
    strategy: DoubleOpenStrategy
    points: int


def _grid(step: float, stop: float, endpoint: bool) -> np.ndarray:
    count = int(math.floor(stop / step)) + 1
    pts = np.arange(count) * step
    return pts[pts <= stop] if endpoint else pts[pts < stop]


def double_open_search(lam: int = 1, angle_grid_step: float = 0.001,
                       chunk: int = 64) -> SearchResult:
    """
    Sweep single-qubit projective measurements along Bloch directions
    ``(polar, azimuth)`` on a grid, score each with every deterministic
    assignment of the two outcomes to ``(s, t)`` guesses, keep the best.

    The standard basis (polar 0) is always on the grid.
    """
    if angle_grid_step <= 0:
        raise ValueError("grid step must be positive")
    polars = _grid(angle_grid_step, math.pi, endpoint=True)
    azimuths = _grid(angle_grid_step, 2 * math.pi, endpoint=False)
    assignments = list(itertools.product(((0, 0), (0, 1), (1, 0), (1, 1)), repeat=2))
    best = (-1.0, 0.0, 0.0, assignments[0])
    cos_az = np.cos(azimuths)
    for start in range(0, polars.size, chunk):
        pol = polars[start:start + chunk]
        nz = np.cos(pol)[:, None]
        nx = np.sin(pol)[:, None] * cos_az[None, :]
        nz = np.broadcast_to(nz, nx.shape)
        # probability of outcome 0 ("along n") on |0>, |1>, |+>, |->
        p0 = {(0, 0): (1 + nz) / 2, (1, 0): (1 - nz) / 2,
              (0, 1): (1 + nx) / 2, (1, 1): (1 - nx) / 2}
        for assign in assignments:
            value = np.zeros(nx.shape)
            for (a, t), q0 in p0.items():
                for k, prob in ((0, q0), (1, 1 - q0)):
                    if _double_open_hit(assign[k], a, t):
                        value = value + prob
            value /= 4
            idx = np.unravel_index(int(np.argmax(value)), value.shape)
            v = float(value[idx])
            if v > best[0] + 1e-15:
                best = (v, float(pol[idx[0]]), float(azimuths[idx[1]]), assign)
    v, pol, az, assign = best
    if assign[0] == assign[1]:
        # both outcomes map to the same guess: the measurement is irrelevant
        meas = SingleQubitMeasurement([(assign[0], np.eye(2))])
    else:
        meas = SingleQubitMeasurement.bloch(pol, az, labels=assign)
    strategy = DoubleOpenStrategy(meas)
    return SearchResult(value=v**lam, qubit_value=v, polar=pol, azimuth=az, strategy=strategy,
                        points=polars.size * azimuths.size)


class BreidbartCommitter(Committer):
    """
    Cheating committer: measures every qubit in the Breidbart basis and
    uses the outcomes as the opening for either bit. In a coin flip it opens
    to whichever bit steers the coin to ``target``.
    """

    def __init__(self, target: int = 0):
        self.target = int(target)
        self.guess: np.ndarray | None = None

    def receive(self, reg, rng):
        labels = measure_product_povm(reg, [SingleQubitMeasurement.breidbart()] * reg.n, rng)
        self.guess = np.array(labels, dtype=np.uint8)

    def open(self, bob_bit):
        bit = self.target if bob_bit is None else self.target ^ int(bob_bit)
        return bit, self.guess

    def candidate_openings(self):
        return {0: self.guess, 1: self.guess}


class StallHolderCommitter(Committer):
    """Keeps the register through the stall; opens with the forced memento."""

    def __init__(self, b: int = 0):
        self.b = int(b)
        self.register = None
        self.memento = None

    def receive(self, reg, rng):
        self.register = reg

    def stall(self, memento):
        self.memento = memento

    def open(self, bob_bit):
        return self.b, self.memento

    def candidate_openings(self):
        return {0: self.memento, 1: self.memento}


# ---------------------------------------------------------------------------
# memento attacks on AmROT
# ---------------------------------------------------------------------------

RawGuesser = Callable[[tuple, tuple], tuple]


@dataclass
class MomentoOtStrategy:
    """
    Malicious AmROT receiver split at the stall.

    Parameters
    ----------
    measurement
        Pre-stall single-qubit measurement (one for all qubits, or one per
        qubit). The tuple of outcome labels is the memento ``w``.
    decode
        Optional map from outcome label to a guessed bit of ``x_i``. When
        given, the raw guesser is "guess bit i from w_i" and fast exact and
        sampled evaluators apply.
    raw_guesser
        ``(w, theta) -> (x0', x1')``; must be deterministic.
    uniform_branch
        If 0 or 1, the guess for that output is a fresh uniform string
        instead of ``h_c(x_c')``.
    hold
        Keep the register through the stall instead of measuring; the stall
        rule then measures it in the standard basis.
    """

    name: str
    measurement: object
    decode: dict | None = None
    raw_guesser: RawGuesser | None = None
    uniform_branch: int | None = None
    hold: bool = False
    deterministic: bool = True

    def __post_init__(self):
        if self.decode is None and self.raw_guesser is None:
            raise StrategyError("need a decode map or a raw guesser")
        if self.hold and not (isinstance(self.measurement, SingleQubitMeasurement)
                              and self.measurement.labels == [0, 1]):
            raise StrategyError("holding strategies are measured in the standard basis")

    def per_qubit(self, lam: int) -> list[SingleQubitMeasurement]:
        return _per_qubit(self.measurement, lam)

    @property
    def local(self) -> bool:
        return self.decode is not None and self.raw_guesser is None

    def guess_raw(self, w: tuple, theta: tuple) -> tuple:
        """``(x0', x1')`` as tuples of bits."""
        if self.raw_guesser is not None:
            x0, x1 = self.raw_guesser(tuple(w), tuple(int(t) for t in theta))
            return tuple(int(b) for b in x0), tuple(int(b) for b in x1)
        bits = [self.decode[lab] for lab in w]
        x0 = tuple(b for b, t in zip(bits, theta) if t == 0)
        x1 = tuple(b for b, t in zip(bits, theta) if t == 1)
        return x0, x1

    def guess_outputs(self, w, theta, h0: HashDescriptor, h1: HashDescriptor,
                      rng: np.random.Generator | None = None):
        """``(m0', m1')``; a uniform branch needs ``rng``."""
        x0, x1 = self.guess_raw(w, theta)
        out = []
        for c, (h, xc) in enumerate(((h0, x0), (h1, x1))):
            if self.uniform_branch == c:
                if rng is None:
                    raise StrategyError("uniform guess requires an rng")
                out.append(rng.integers(0, 2, size=h.out_len, dtype=np.uint8))
            else:
                out.append(eval_hash(h, np.array(xc, dtype=np.uint8)))
        return tuple(out)

    def as_receiver(self) -> "MementoReceiver":
        return MementoReceiver(self)


class MementoReceiver(RotReceiver):
    """Runs a :class:`MomentoOtStrategy` inside a real AmROT session."""

    def __init__(self, strategy: MomentoOtStrategy):
        self.strategy = strategy
        self.w: tuple | None = None
        self.rng = None

    def receive(self, reg, rng):
        self.rng = rng
        if self.strategy.hold:
            return
        self.w = tuple(measure_product_povm(reg, self.strategy.per_qubit(reg.n), rng))

    def stall(self, memento):
        if self.strategy.hold:
            self.w = tuple(int(b) for b in memento)

    def finish(self, h0, h1, theta):
        return self.strategy.guess_outputs(self.w, tuple(int(t) for t in theta), h0, h1, self.rng)


_BIT_DECODE = {0: 0, 1: 1}


def builtin_attacks(lam: int) -> dict[str, MomentoOtStrategy]:
    """The registry of implemented malicious receivers."""
    four = SingleQubitMeasurement.bb84_four()

    def honest(b: int) -> MomentoOtStrategy:
        return MomentoOtStrategy(f"honest-{b}", SingleQubitMeasurement.basis(b),
                                 decode=dict(_BIT_DECODE), uniform_branch=1 - b)

    return {
        "standard": MomentoOtStrategy("standard", SingleQubitMeasurement.standard(),
                                      decode=dict(_BIT_DECODE)),
        "hadamard": MomentoOtStrategy("hadamard", SingleQubitMeasurement.hadamard(),
                                      decode=dict(_BIT_DECODE)),
        "breidbart": MomentoOtStrategy("breidbart", SingleQubitMeasurement.breidbart(),
                                       decode=dict(_BIT_DECODE)),
        "bb84-four": MomentoOtStrategy("bb84-four", four,
                                       decode={"0": 0, "1": 1, "+": 0, "-": 1}),
        "stall-holder": MomentoOtStrategy("stall-holder", SingleQubitMeasurement.standard(),
                                          decode=dict(_BIT_DECODE), hold=True),
        "honest-0": honest(0),
        "honest-1": honest(1),
        "constant": MomentoOtStrategy("constant", SingleQubitMeasurement.standard(),
                                      decode={0: 0, 1: 0}),
    }


def optimal_raw_guesser(measurement, lam: int) -> RawGuesser:
    """
    Posterior-maximizing guess of ``(x0, x1)`` from ``(w, theta)``; ties go
    to the lexicographically smallest ``x``.
    """
    ms = _per_qubit(measurement, lam)
    tables = [single_qubit_table(m) for m in ms]
    label_index = [{lab: k for k, lab in enumerate(m.labels)} for m in ms]
    xs = list(itertools.product((0, 1), repeat=lam))

    @lru_cache(maxsize=None)
    def best(w: tuple, theta: tuple) -> tuple:
        top, arg = -1.0, xs[0]
        for x in xs:
            p = 1.0
            for i, (xi, t) in enumerate(zip(x, theta)):
                p *= tables[i][xi, t, label_index[i][w[i]]]
            if p > top + 1e-15:
                top, arg = p, x
        x0 = tuple(b for b, t in zip(arg, theta) if t == 0)
        x1 = tuple(b for b, t in zip(arg, theta) if t == 1)
        return x0, x1

    return best


def _outcome_space(ms: Sequence[SingleQubitMeasurement]):
    return itertools.product(*(m.labels for m in ms))


def _likelihoods(ms, secret: BB84Secret) -> dict:
    """``P(w | x, theta)`` for a product measurement on a product BB84 state."""
    reg = prepare_bb84(secret)
    tables = [m.probabilities(v) for m, v in zip(ms, reg.factors)]
    out = {}
    for w in _outcome_space(ms):
        p = 1.0
        for t, lab in zip(tables, w):
            p *= t[lab]
        if p > 0:
            out[w] = p
    return out


def ot_joint_guess_probability(strategy: MomentoOtStrategy, lam: int) -> float:
    """
    Exact probability that the raw guess equals ``(x0, x1)``, computed from
    ``lam``-qubit outcome tables of the BB84 states the sender prepares.
    """
    ms = strategy.per_qubit(lam)
    total = 0.0
    for secret in all_secrets(lam):
        theta = tuple(int(t) for t in secret.theta)
        target = (tuple(int(b) for b in restrict(secret.a, secret.theta, 0)),
                  tuple(int(b) for b in restrict(secret.a, secret.theta, 1)))
        reg = QuantumRegister(prepare_bb84(secret).amplitudes)
        for w, p in outcome_distribution(reg, ms).as_dict().items():
            if strategy.guess_raw(w, theta) == target:
                total += p
    return total / 4**lam


# ---------------------------------------------------------------------------
# MOE game
# ---------------------------------------------------------------------------

@dataclass
class MoeStrategy:
    """
    Measure-and-copy strategy: measure the D half of the Bell pairs with
    ``measurement``, copy ``w`` to Bob and Charlie, each answers
    ``response(w, theta)``.
    """

    measurement: object
    bob: Callable[[tuple, tuple], tuple]
    charlie: Callable[[tuple, tuple], tuple] | None = None

    def per_qubit(self, lam: int) -> list[SingleQubitMeasurement]:
        return _per_qubit(self.measurement, lam)

    def check_identical(self, lam: int) -> None:
        if self.charlie is None or self.charlie is self.bob:
            return
        for w in _outcome_space(self.per_qubit(lam)):
            for theta in itertools.product((0, 1), repeat=lam):
                if tuple(self.bob(w, theta)) != tuple(self.charlie(w, theta)):
                    raise StrategyError("Bob and Charlie must answer identically from identical w")


def moe_game_value(strategy: MoeStrategy, lam: int) -> float:
    """
    Exact winning probability. For each ``theta`` the ``2 lam``-qubit Bell
    state is measured jointly: Alice's qubits in basis ``theta`` and the D
    qubits with the strategy's measurement; the game is won when the shared
    response equals Alice's outcome.
    """
    if lam > 5:
        raise StrategyError("dense MOE evaluation is limited to lam <= 5")
    strategy.check_identical(lam)
    ms = strategy.per_qubit(lam)
    total = 0.0
    for theta in itertools.product((0, 1), repeat=lam):
        alice = [SingleQubitMeasurement.basis(t) for t in theta]
        dist = outcome_distribution(bell_pairs(lam), alice + ms)
        for labels, p in dist.as_dict().items():
            x, w = labels[:lam], labels[lam:]
            if tuple(int(b) for b in strategy.bob(w, theta)) == tuple(int(b) for b in x):
                total += p
    return total / 2**lam


def moe_optimal_strategy(measurement, lam: int) -> MoeStrategy:
    """Measure-and-copy with the posterior-maximizing response."""
    raw = optimal_raw_guesser(measurement, lam)
    return reduce_ot_attack_to_moe(
        MomentoOtStrategy("optimal", measurement, raw_guesser=raw), lam)


def reduce_ot_attack_to_moe(strategy: MomentoOtStrategy, lam: int) -> MoeStrategy:
    """
    Bob/Charlie strategy from a memento attack: same measurement applied to
    the D half, both parties run the raw guesser on the copied ``w`` and
    interleave ``(x0', x1')`` back into position order by ``theta``.
    """
    if not strategy.deterministic:
        raise StrategyError("the reduction needs a deterministic guesser")
    ms = strategy.per_qubit(lam)
    for w in _outcome_space(ms):
        for theta in itertools.product((0, 1), repeat=lam):
            if strategy.guess_raw(w, theta) != strategy.guess_raw(w, theta):
                raise StrategyError("guesser is not deterministic")

    def respond(w: tuple, theta: tuple) -> tuple:
        x0, x1 = strategy.guess_raw(w, theta)
        it = (iter(x0), iter(x1))
        return tuple(next(it[int(t)]) for t in theta)

    return MoeStrategy(strategy.measurement, respond)


# ---------------------------------------------------------------------------
# guessing (m0, m1)
# ---------------------------------------------------------------------------

@dataclass
class GuessEstimate:
    attack_id: str
    lam: int
    ell: int
    mode: str
    value: float
    ci_low: float
    ci_high: float
    trials: int | None = None
    seed: int | None = None

    @property
    def advantage(self) -> float:
        return self.value - 2.0**-self.ell


@lru_cache(maxsize=32)
def collision_matrix(max_input_len: int, ell: int) -> tuple[dict, np.ndarray]:
    """
    Exact pairwise collision probabilities over every string of length
    ``<= max_input_len``, by enumerating the whole family.
    """
    strings = [s for k in range(max_input_len + 1) for s in itertools.product((0, 1), repeat=k)]
    table = hash_table(max_input_len, ell, [np.array(s, dtype=np.uint8) for s in strings])
    n_seeds = table.shape[0]
    coll = np.zeros((len(strings), len(strings)))
    for i in range(len(strings)):
        coll[i] = (table == table[:, [i]]).sum(axis=0) / n_seeds
    index = {s: i for i, s in enumerate(strings)}
    return index, coll


def _exact_guess(strategy: MomentoOtStrategy, lam: int, ell: int) -> float:
    index, coll = collision_matrix(lam, ell)
    ms = strategy.per_qubit(lam)
    uniform = 2.0**-ell
    total = 0.0
    for secret in all_secrets(lam):
        theta = tuple(int(t) for t in secret.theta)
        x0 = tuple(int(b) for b in restrict(secret.a, secret.theta, 0))
        x1 = tuple(int(b) for b in restrict(secret.a, secret.theta, 1))
        for w, p in _likelihoods(ms, secret).items():
            g0, g1 = strategy.guess_raw(w, theta)
            f = 1.0
            for c, (g, x) in enumerate(((g0, x0), (g1, x1))):
                f *= uniform if strategy.uniform_branch == c else coll[index[g], index[x]]
            total += p * f
    return total / 4**lam


def _exact_guess_local(strategy: MomentoOtStrategy, lam: int, ell: int) -> float:
    """
    Factorized exact evaluator for local decoders: per-qubit correctness is
    independent across qubits, and every pair of distinct strings collides
    with the single enumerated probability of the family.
    """
    index, coll = collision_matrix(lam, ell)
    off = coll[~np.eye(coll.shape[0], dtype=bool)]
    if off.size and np.ptp(off) > 1e-15:
        raise StrategyError("hash family is not exactly universal")
    q = float(off[0]) if off.size else 0.0
    ms = strategy.per_qubit(lam)
    right = []
    for m in ms:
        tab = single_qubit_table(m)
        r = np.zeros((2, 2))
        for a in (0, 1):
            for t in (0, 1):
                r[a, t] = sum(tab[a, t, k] for k, lab in enumerate(m.labels)
                              if strategy.decode[lab] == a)
        right.append(r)
    uniform = 2.0**-ell
    total = 0.0
    for secret in all_secrets(lam):
        f = 1.0
        for c in (0, 1):
            if strategy.uniform_branch == c:
                f *= uniform
                continue
            pos = np.flatnonzero(secret.theta == c)
            r = float(np.prod([right[i][secret.a[i], c] for i in pos])) if pos.size else 1.0
            f *= r + (1 - r) * q
        total += f
    return total / 4**lam


def _sample_local(strategy: MomentoOtStrategy, lam: int, ell: int, trials: int,
                  rng: np.random.Generator, batch: int = 20000) -> int:
    """Vectorized Monte Carlo for local decoders; returns the success count."""
    ms = strategy.per_qubit(lam)
    tables = np.stack([single_qubit_table(m) for m in ms])            # (lam, 2, 2, k)
    decoded = np.stack([[strategy.decode[lab] for lab in m.labels] for m in ms])  # (lam, k)
    plen = padded_length(lam)
    width = length_field_width(lam)
    slen = seed_length(lam, ell)
    wins = 0
    done = 0
    qubits = np.arange(lam)
    while done < trials:
        n = min(batch, trials - done)
        x = rng.integers(0, 2, size=(n, lam), dtype=np.uint8)
        theta = rng.integers(0, 2, size=(n, lam), dtype=np.uint8)
        probs = tables[qubits[None, :], x, theta]                          # (n, lam, k)
        cum = np.cumsum(probs, axis=2)
        u = rng.random((n, lam, 1))
        k = np.minimum((u > cum).sum(axis=2), probs.shape[2] - 1)
        guess = decoded[qubits[None, :], k].astype(np.uint8)               # (n, lam)
        ok = np.ones(n, dtype=bool)
        for c in (0, 1):
            seeds = rng.integers(0, 2, size=(n, slen), dtype=np.uint8)
            if strategy.uniform_branch == c:
                m_true = _toeplitz_batch(seeds, _pad_batch(x, theta, c, lam, plen, width), ell)
                m_guess = rng.integers(0, 2, size=(n, ell), dtype=np.uint8)
            else:
                m_true = _toeplitz_batch(seeds, _pad_batch(x, theta, c, lam, plen, width), ell)
                m_guess = _toeplitz_batch(seeds, _pad_batch(guess, theta, c, lam, plen, width), ell)
            ok &= (m_true == m_guess).all(axis=1)
        wins += int(ok.sum())
        done += n
    return wins


def _pad_batch(bits: np.ndarray, theta: np.ndarray, c: int, lam: int, plen: int,
               width: int) -> np.ndarray:
    """Row-wise ``pad(bits restricted to theta == c)``."""
    sel = theta == c
    order = np.argsort(~sel, axis=1, kind="stable")
    gathered = np.take_along_axis(bits, order, axis=1)
    count = sel.sum(axis=1)
    keep = np.arange(lam)[None, :] < count[:, None]
    out = np.zeros((bits.shape[0], plen), dtype=np.uint8)
    out[:, :lam] = gathered * keep
    for i in range(width):
        out[:, lam + i] = (count >> (width - 1 - i)) & 1
    return out


def _toeplitz_batch(seeds: np.ndarray, padded: np.ndarray, ell: int) -> np.ndarray:
    plen = padded.shape[1]
    out = np.zeros((seeds.shape[0], ell), dtype=np.uint8)
    for i in range(ell):
        row = seeds[:, ell - 1 - i: ell - 1 - i + plen]
        out[:, i] = (row.astype(np.int64) * padded).sum(axis=1) % 2
    return out


def _sample_generic(strategy: MomentoOtStrategy, lam: int, ell: int, trials: int,
                    rng: np.random.Generator) -> int:
    ms = strategy.per_qubit(lam)
    tables = [single_qubit_table(m) for m in ms]
    wins = 0
    for _ in range(trials):
        secret = BB84Secret.random(lam, rng)
        w = tuple(m.labels[int(rng.choice(len(m.labels), p=tab[a, t]))]
                  for m, tab, a, t in zip(ms, tables, secret.a, secret.theta))
        h0, h1 = sample_hash(lam, ell, rng), sample_hash(lam, ell, rng)
        m0 = eval_hash(h0, restrict(secret.a, secret.theta, 0))
        m1 = eval_hash(h1, restrict(secret.a, secret.theta, 1))
        g0, g1 = strategy.guess_outputs(w, tuple(int(t) for t in secret.theta), h0, h1, rng)
        wins += bool(np.array_equal(g0, m0) and np.array_equal(g1, m1))
    return wins


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    alpha = 1 - level
    lo = 0.0 if successes == 0 else float(beta.ppf(alpha / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(beta.ppf(1 - alpha / 2, successes + 1,
                                                            trials - successes))
    return lo, hi


def ot_receiver_guess_probability(strategy: MomentoOtStrategy, lam: int, ell: int,
                                  mode: str = "exact", trials: int = 10**5,
                                  rng: np.random.Generator | None = None,
                                  seed: int | None = None) -> GuessEstimate:
    """
    Probability that the receiver guesses both outputs (the sender of AmROT
    never aborts). ``mode`` is ``"exact"`` (full enumeration, ``lam <= 6``)
    or ``"mc"`` (Monte Carlo with a 95% Clopper-Pearson interval).
    """
    if mode == "exact":
        if lam > 6:
            raise StrategyError("exact mode is limited to lam <= 6")
        outcomes = int(np.prod([len(m.labels) for m in strategy.per_qubit(lam)]))
        if 4**lam * outcomes <= 2**20 or not strategy.local:
            if 4**lam * outcomes > EXACT_ATOM_LIMIT:
                raise StrategyError("enumeration exceeds the exact-mode budget")
            value = _exact_guess(strategy, lam, ell)
        else:
            value = _exact_guess_local(strategy, lam, ell)
        return GuessEstimate(strategy.name, lam, ell, "exact", value, value, value, seed=seed)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        rng = np.random.default_rng(seed)
    if strategy.local:
        wins = _sample_local(strategy, lam, ell, trials, rng)
    else:
        wins = _sample_generic(strategy, lam, ell, trials, rng)
    lo, hi = clopper_pearson(wins, trials)
    return GuessEstimate(strategy.name, lam, ell, "mc", wins / trials, lo, hi, trials, seed)


# ---------------------------------------------------------------------------
# distinguisher
# ---------------------------------------------------------------------------

@dataclass
class Distinguisher:
    """
    Tells ``(<h>, h(x_c), w, theta, c)`` from ``(<h>, U, w, theta, c)``:
    puts ``h`` in slot ``c``, samples the other slot, runs the attack's
    post-stall guesser and answers 1 iff ``m~`` equals the guess ``m'_c``.
    """

    strategy: MomentoOtStrategy

    def __call__(self, h: HashDescriptor, m_tilde, w, theta, c: int,
                 rng: np.random.Generator) -> int:
        other = sample_hash(h.max_input_len, h.out_len, rng)
        h0, h1 = (h, other) if c == 0 else (other, h)
        guesses = self.strategy.guess_outputs(tuple(w), tuple(int(t) for t in theta), h0, h1, rng)
        return int(np.array_equal(as_bits(m_tilde), guesses[c]))

    def acceptance_exact(self, lam: int, ell: int, c: int, hashed: bool) -> float:
        """
        Exact acceptance probability with ``m~ = h(x_c)`` (``hashed``) or
        uniform ``m~``, enumerating ``x, theta, w`` and the whole family.
        """
        ms = self.strategy.per_qubit(lam)
        index, coll = collision_matrix(lam, ell)
        uniform = 2.0**-ell
        total = 0.0
        for secret in all_secrets(lam):
            theta = tuple(int(t) for t in secret.theta)
            xc = tuple(int(b) for b in restrict(secret.a, secret.theta, c))
            for w, p in _likelihoods(ms, secret).items():
                if not hashed or self.strategy.uniform_branch == c:
                    # m~ or m'_c is uniform and independent of the other
                    total += p * uniform
                    continue
                gc = self.strategy.guess_raw(w, theta)[c]
                total += p * coll[index[gc], index[xc]]
        return total / 4**lam

    def advantage_exact(self, lam: int, ell: int, c: int) -> float:
        return (self.acceptance_exact(lam, ell, c, True)
                - self.acceptance_exact(lam, ell, c, False))


def build_distinguisher(strategy: MomentoOtStrategy) -> Distinguisher:
    return Distinguisher(strategy)


def attack_record(est: GuessEstimate, bound: float) -> dict:
    """JSON-ready attack result."""
    return {"attack_id": est.attack_id, "lambda": est.lam, "ell": est.ell, "mode": est.mode,
            "value": est.value, "ci_low": est.ci_low, "ci_high": est.ci_high,
            "bound": bound, "seed": est.seed}
