"""
Message-driven AmCom (bit commitment), AmROT (random oblivious transfer) and
AmFlip (coin flipping) over a simulated channel without quantum memory.

A STALL message passing through the :class:`Channel` forces every live
register held by any party to be measured in the standard basis; the
outcome is the only thing the holder keeps. Honest parties always measure
before the stall, so for them the rule never fires.

Positions in ``Cons(theta, c) = {i : theta_i = c}`` are 0-based and keep
their original order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .hashing import HashDescriptor, eval_hash, sample_hash
from .quantum import (MAX_QUBITS, BB84Secret, QuantumError, QuantumRegister, as_bits,
                      measure_in_bases, prepare_bb84)
from .wire import Kind, Message, Tag, Transcript, decode_register


class ProtocolError(ValueError):
    pass


class _Abort:
    """Abort outcome; a value, never raised."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Abort"

    def __bool__(self) -> bool:
        return False


ABORT = _Abort()


def _check_lambda(lam: int) -> None:
    if not 1 <= lam <= MAX_QUBITS:
        raise ProtocolError(f"security parameter must be in [1, {MAX_QUBITS}], got {lam}")


def restrict(bits, theta, c: int) -> np.ndarray:
    """``bits`` at the positions where ``theta_i == c``."""
    bits, theta = as_bits(bits), as_bits(theta)
    if bits.size != theta.size:
        raise ProtocolError("length mismatch in restriction")
    return bits[theta == c]


# ---------------------------------------------------------------------------
# channel
# ---------------------------------------------------------------------------

class Channel:
    """
    Delivers messages between named roles, records the transcript and
    enforces the stall rule.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.transcript = Transcript()
        self.holdings: dict[str, list[QuantumRegister]] = {}
        self.mementos: dict[str, list[np.ndarray]] = {}
        self.stalls = 0

    @property
    def forced_measurements(self) -> int:
        return self.transcript.forced_measurements

    def live_registers(self) -> list[tuple[str, QuantumRegister]]:
        return [(role, reg) for role, regs in self.holdings.items() for reg in regs if reg.alive]

    def step(self, msg: Message) -> Message:
        if msg.kind == Kind.QUANTUM:
            if msg.register is None:
                raise ProtocolError("QUANTUM message without a register")
            msg.register.require_alive()
            # the sender gives its copy away
            msg.register.kill()
            received = decode_register(msg.payload)
            self.holdings.setdefault(msg.destination, []).append(received)
            delivered = Message(msg.kind, msg.direction, msg.payload, register=received)
            self.transcript.record(delivered)
            return delivered
        if msg.kind == Kind.STALL:
            forced = 0
            for role, reg in self.live_registers():
                memento = measure_in_bases(reg, np.zeros(reg.n, dtype=np.uint8), self.rng)
                self.mementos.setdefault(role, []).append(memento)
                forced += 1
            self.stalls += 1
            assert not self.live_registers(), "live register survived a stall"
            self.transcript.record(msg, forced)
            return msg
        self.transcript.record(msg)
        return msg

    def memento(self, role: str) -> np.ndarray | None:
        kept = self.mementos.get(role)
        return kept[-1] if kept else None


def channel_step(channel: Channel, msg: Message) -> Message:
    return channel.step(msg)


# ---------------------------------------------------------------------------
# party states
# ---------------------------------------------------------------------------

@dataclass
class CommitReceiverState:
    a: np.ndarray
    theta: np.ndarray
    phase: str = "sent"


@dataclass
class CommitterState:
    b: int
    sigma: np.ndarray
    phase: str = "committed"


@dataclass
class RotSenderState:
    x: np.ndarray
    theta: np.ndarray
    h0: HashDescriptor | None = None
    h1: HashDescriptor | None = None
    phase: str = "sent"


@dataclass
class RotReceiverState:
    b: int
    sigma: np.ndarray
    r: np.ndarray | None = None
    phase: str = "measured"


@dataclass
class FlipState:
    a: int | None = None
    b: int | None = None
    a_revealed: int | None = None
    c_alice: object = None
    c_bob: object = None


# ---------------------------------------------------------------------------
# AmCom
# ---------------------------------------------------------------------------

def amcom_receiver_init(lam: int, rng: np.random.Generator, secret: BB84Secret | None = None,
                        direction: str = "receiver->committer"):
    """Sample ``(a, theta)``, emit ``H^theta |a>`` and a stall."""
    _check_lambda(lam)
    if secret is None:
        secret = BB84Secret.random(lam, rng)
    elif secret.n != lam:
        raise ProtocolError("secret length differs from lambda")
    reg = prepare_bb84(secret)
    state = CommitReceiverState(secret.a.copy(), secret.theta.copy())
    return state, [Message.quantum(reg, direction), Message.stall(direction)]


def amcom_committer_commit(b: int, reg: QuantumRegister,
                           rng: np.random.Generator) -> CommitterState:
    """Measure every qubit in basis ``b`` (standard for 0, Hadamard for 1)."""
    if b not in (0, 1):
        raise ProtocolError(f"committed bit must be 0 or 1, got {b!r}")
    try:
        sigma = measure_in_bases(reg, np.full(reg.n, b, dtype=np.uint8), rng)
    except QuantumError as exc:
        raise ProtocolError(f"cannot commit: {exc}") from exc
    return CommitterState(int(b), sigma)


def amcom_reveal(cs: CommitterState, direction: str = "committer->receiver") -> Message:
    cs.phase = "revealed"
    return Message.reveal(cs.b, cs.sigma, direction)


def amcom_verify(rs: CommitReceiverState, b: int, sigma):
    """Accept (return ``b``) iff ``sigma`` agrees with ``a`` wherever ``theta_i == b``."""
    sigma = as_bits(sigma)
    rs.phase = "verified"
    if b not in (0, 1) or sigma.size != rs.a.size:
        return ABORT
    mask = rs.theta == b
    if np.array_equal(sigma[mask], rs.a[mask]):
        return int(b)
    return ABORT


class Committer:
    """
    Committer behaviour hook. ``receive`` runs before the stall, ``stall``
    hands over whatever the forced measurement left, ``open`` produces the
    reveal (``bob_bit`` is the coin-flip challenge, None in plain AmCom).
    """

    def receive(self, reg: QuantumRegister, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def stall(self, memento: np.ndarray | None) -> None:
        pass

    def open(self, bob_bit: int | None) -> tuple[int, np.ndarray]:
        raise NotImplementedError

    def candidate_openings(self) -> dict[int, np.ndarray] | None:
        """Openings the strategy could send for each bit, if it has them."""
        return None


class HonestCommitter(Committer):
    def __init__(self, b: int):
        self.b = int(b)
        self.state: CommitterState | None = None

    def receive(self, reg, rng):
        self.state = amcom_committer_commit(self.b, reg, rng)

    def open(self, bob_bit):
        return self.state.b, self.state.sigma


@dataclass
class CommitOutcome:
    verdict: object
    transcript: Transcript
    receiver: CommitReceiverState
    committer: Committer
    channel: Channel


def run_amcom(lam: int, b: int, rng: np.random.Generator, committer: Committer | None = None,
              secret: BB84Secret | None = None) -> CommitOutcome:
    """One full commit/reveal session."""
    committer = committer or HonestCommitter(b)
    channel = Channel(rng)
    rs, (quantum, stall) = amcom_receiver_init(lam, rng, secret)
    delivered = channel.step(quantum)
    committer.receive(delivered.register, rng)
    channel.step(stall)
    committer.stall(channel.memento("committer"))
    channel.transcript.mark("reveal")
    bit, sigma = committer.open(None)
    msg = channel.step(Message.reveal(bit, sigma, "committer->receiver"))
    tag, fields = msg.body()
    verdict = amcom_verify(rs, fields["b"], fields["sigma"]) if tag == Tag.REVEAL else ABORT
    return CommitOutcome(verdict, channel.transcript, rs, committer, channel)


# ---------------------------------------------------------------------------
# AmROT
# ---------------------------------------------------------------------------

def amrot_sender_init(lam: int, rng: np.random.Generator, secret: BB84Secret | None = None,
                      direction: str = "sender->receiver"):
    """Sample ``(x, theta)``, emit ``H^theta |x>`` and a stall."""
    _check_lambda(lam)
    if secret is None:
        secret = BB84Secret.random(lam, rng)
    elif secret.n != lam:
        raise ProtocolError("secret length differs from lambda")
    reg = prepare_bb84(secret)
    state = RotSenderState(secret.a.copy(), secret.theta.copy())
    return state, [Message.quantum(reg, direction), Message.stall(direction)]


def amrot_receiver_measure(b: int, reg: QuantumRegister,
                           rng: np.random.Generator) -> RotReceiverState:
    if b not in (0, 1):
        raise ProtocolError(f"choice bit must be 0 or 1, got {b!r}")
    try:
        sigma = measure_in_bases(reg, np.full(reg.n, b, dtype=np.uint8), rng)
    except QuantumError as exc:
        raise ProtocolError(f"cannot measure: {exc}") from exc
    return RotReceiverState(int(b), sigma)


def amrot_sender_hash(ss: RotSenderState, ell: int, rng: np.random.Generator,
                      direction: str = "sender->receiver"):
    """Sample ``h0, h1``; ``m_c = h_c(x restricted to Cons(theta, c))``."""
    if ell < 1:
        raise ProtocolError("output length must be >= 1")
    lam = ss.x.size
    ss.h0 = sample_hash(lam, ell, rng)
    ss.h1 = sample_hash(lam, ell, rng)
    m0 = eval_hash(ss.h0, restrict(ss.x, ss.theta, 0))
    m1 = eval_hash(ss.h1, restrict(ss.x, ss.theta, 1))
    ss.phase = "hashed"
    return (m0, m1), Message.hashes(ss.h0, ss.h1, ss.theta, direction)


def amrot_receiver_finish(rs: RotReceiverState, h0, h1, theta) -> np.ndarray:
    """``r = h_b(sigma restricted to Cons(theta, b))``."""
    if isinstance(h0, (bytes, bytearray)):
        h0 = HashDescriptor.from_bytes(bytes(h0))
    if isinstance(h1, (bytes, bytearray)):
        h1 = HashDescriptor.from_bytes(bytes(h1))
    if not isinstance(h0, HashDescriptor) or not isinstance(h1, HashDescriptor):
        raise ProtocolError("malformed hash descriptors")
    theta = as_bits(theta)
    if theta.size != rs.sigma.size:
        raise ProtocolError("theta length differs from the measured string")
    h = h1 if rs.b else h0
    rs.r = eval_hash(h, restrict(rs.sigma, theta, rs.b))
    rs.phase = "done"
    return rs.r


class RotReceiver:
    """Receiver behaviour hook for AmROT; mirrors :class:`Committer`."""

    def receive(self, reg: QuantumRegister, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def stall(self, memento: np.ndarray | None) -> None:
        pass

    def finish(self, h0: HashDescriptor, h1: HashDescriptor, theta: np.ndarray):
        """Return ``r`` (honest) or a guess pair ``(m0', m1')``."""
        raise NotImplementedError


class HonestRotReceiver(RotReceiver):
    def __init__(self, b: int):
        self.b = int(b)
        self.state: RotReceiverState | None = None

    def receive(self, reg, rng):
        self.state = amrot_receiver_measure(self.b, reg, rng)

    def finish(self, h0, h1, theta):
        return amrot_receiver_finish(self.state, h0, h1, theta)


@dataclass
class RotOutcome:
    m0: np.ndarray
    m1: np.ndarray
    receiver_output: object
    transcript: Transcript
    sender: RotSenderState
    receiver: RotReceiver
    channel: Channel


def run_amrot(lam: int, ell: int, b: int, rng: np.random.Generator,
              receiver: RotReceiver | None = None, secret: BB84Secret | None = None) -> RotOutcome:
    """One AmROT session; the hash message goes out only after the stall."""
    receiver = receiver or HonestRotReceiver(b)
    channel = Channel(rng)
    ss, (quantum, stall) = amrot_sender_init(lam, rng, secret)
    delivered = channel.step(quantum)
    receiver.receive(delivered.register, rng)
    channel.step(stall)
    receiver.stall(channel.memento("receiver"))
    (m0, m1), msg = amrot_sender_hash(ss, ell, rng)
    tag, fields = channel.step(msg).body()
    out = receiver.finish(fields["h0"], fields["h1"], fields["theta"])
    return RotOutcome(m0, m1, out, channel.transcript, ss, receiver, channel)


def ot_from_rot(m0, m1, b: int, lam: int, rng: np.random.Generator):
    """
    Chosen-input OT on top of AmROT: the sender masks its inputs with its
    random outputs, the receiver unmasks branch ``b``.

    Returns ``(output, transcript)``.
    """
    m0, m1 = as_bits(m0), as_bits(m1)
    if m0.size != m1.size or m0.size < 1:
        raise ProtocolError("OT inputs must be non-empty and of equal length")
    rot = run_amrot(lam, m0.size, b, rng)
    msg = rot.channel.step(Message.masked(m0 ^ rot.m0, m1 ^ rot.m1, "sender->receiver"))
    _, fields = msg.body()
    masked = fields["e1"] if b else fields["e0"]
    return masked ^ rot.receiver_output, rot.transcript


# ---------------------------------------------------------------------------
# AmFlip
# ---------------------------------------------------------------------------

@dataclass
class FlipOutcome:
    c_alice: object
    c_bob: object
    transcript: Transcript
    state: FlipState
    double_open: bool | None = None

    def __iter__(self) -> Iterator:
        return iter((self.c_alice, self.c_bob, self.transcript))


def amflip_run(alice_rng: np.random.Generator, bob_rng: np.random.Generator,
               adversary: Committer | None = None, lam: int = 8,
               alice_bit: int | None = None, bob_bit: int | None = None) -> FlipOutcome:
    """
    Coin flip from AmCom: Alice commits to ``a``, Bob answers with ``b``,
    Alice opens, both output ``a XOR b`` (Bob outputs Abort on a bad opening).

    ``adversary`` replaces honest Alice's commit/open behaviour; the honest
    ``c_alice`` is then meaningless and reported as None. ``double_open``
    records whether the adversary held valid openings for both bits.
    """
    state = FlipState()
    if adversary is None:
        state.a = int(alice_rng.integers(0, 2)) if alice_bit is None else int(alice_bit)
        alice = HonestCommitter(state.a)
    else:
        alice = adversary
    channel = Channel(alice_rng)
    rs, (quantum, stall) = amcom_receiver_init(lam, bob_rng, direction="bob->alice")
    delivered = channel.step(quantum)
    alice.receive(delivered.register, alice_rng)
    channel.step(stall)
    alice.stall(channel.memento("alice"))
    channel.transcript.mark("coin")
    state.b = int(bob_rng.integers(0, 2)) if bob_bit is None else int(bob_bit)
    coin = channel.step(Message.coinbit(state.b, "bob->alice"))
    _, coin_fields = coin.body()
    channel.transcript.mark("reveal")
    a_open, sigma = alice.open(coin_fields["b"])
    msg = channel.step(Message.reveal(a_open, sigma, "alice->bob"))
    tag, fields = msg.body()
    verdict = amcom_verify(rs, fields["b"], fields["sigma"]) if tag == Tag.REVEAL else ABORT
    state.a_revealed = None if verdict is ABORT else verdict
    state.c_bob = ABORT if verdict is ABORT else verdict ^ state.b
    state.c_alice = None if adversary is not None else state.a ^ state.b
    double = None
    openings = alice.candidate_openings()
    if openings is not None:
        double = all(amcom_verify(CommitReceiverState(rs.a, rs.theta), bit, openings[bit]) == bit
                     for bit in (0, 1))
    return FlipOutcome(state.c_alice, state.c_bob, channel.transcript, state, double)
