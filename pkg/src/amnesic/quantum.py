"""
Few-qubit pure-state simulation: BB84 preparation and Born-rule measurement.

Qubit ordering: qubit 0 is the most significant bit of the amplitude index,
so ``|q0 q1 ... q_{n-1}>`` sits at index ``sum q_i 2^(n-1-i)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .infotheory import JointDistribution

MAX_QUBITS = 24
NORM_TOL = 1e-12
PSD_TOL = 1e-12

SQRT_HALF = 1 / math.sqrt(2)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) * SQRT_HALF
BREIDBART_ANGLE = math.pi / 8


class QuantumError(ValueError):
    """Invalid quantum operation (dead register, bad shape, bad POVM)."""


def as_bits(value) -> np.ndarray:
    """Coerce ``"0101"``, a sequence of 0/1 or an array into a uint8 vector."""
    if isinstance(value, str):
        if value and set(value) - {"0", "1"}:
            raise QuantumError(f"not a bitstring: {value!r}")
        return np.fromiter((int(c) for c in value), dtype=np.uint8, count=len(value))
    arr = np.asarray(value, dtype=np.uint8).reshape(-1)
    if arr.size and arr.max() > 1:
        raise QuantumError("bit values must be 0 or 1")
    return arr


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


class QuantumRegister:
    """
    An n-qubit pure state that can be consumed exactly once.

    A register is stored either densely (``2^n`` amplitudes) or, when it is
    a product state, as ``n`` single-qubit factors; the dense vector of a
    product register is built on first access. Both forms are exact.

    Measuring (or a forced measurement at a stall) sets ``alive`` to False;
    every later operation raises :class:`QuantumError`.
    """

    __slots__ = ("n", "_amplitudes", "factors", "alive")

    def __init__(self, amplitudes=None, alive: bool = True, factors=None):
        if (amplitudes is None) == (factors is None):
            raise QuantumError("give exactly one of amplitudes or factors")
        if factors is not None:
            f = np.asarray(factors, dtype=np.complex128)
            if f.ndim != 2 or f.shape[1] != 2 or f.shape[0] < 1:
                raise QuantumError(f"factors must have shape (n, 2), got {f.shape}")
            norms = np.einsum("ij,ij->i", f.conj(), f).real
            if np.abs(norms - 1).max() > NORM_TOL:
                raise QuantumError("single-qubit factor not normalized")
            n = f.shape[0]
            amps = None
        else:
            amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
            n = int(round(math.log2(amps.size))) if amps.size else 0
            if amps.size != 2**n or n < 1:
                raise QuantumError(f"amplitude vector length {amps.size} is not 2^n, n>=1")
            norm = float(np.vdot(amps, amps).real)
            if abs(norm - 1) > NORM_TOL * max(1, amps.size):
                raise QuantumError(f"state not normalized (|psi|^2 = {norm!r})")
            f = None
        if n > MAX_QUBITS:
            raise QuantumError(f"{n} qubits exceeds cap of {MAX_QUBITS}")
        self.n = n
        self._amplitudes = amps
        self.factors = f
        self.alive = alive

    @property
    def amplitudes(self) -> np.ndarray:
        if self._amplitudes is None:
            state = np.ones(1, dtype=np.complex128)
            for v in self.factors:
                state = (state[:, None] * v[None, :]).reshape(-1)
            self._amplitudes = state
        return self._amplitudes

    @property
    def is_product(self) -> bool:
        return self.factors is not None

    def require_alive(self) -> None:
        if not self.alive:
            raise QuantumError("register has already been measured")

    def kill(self) -> None:
        self.alive = False

    def __repr__(self) -> str:
        return f"QuantumRegister(n={self.n}, alive={self.alive})"


@dataclass(frozen=True)
class BB84Secret:
    """Classical description ``(a, theta)`` of a BB84 register."""

    a: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        a, theta = as_bits(self.a), as_bits(self.theta)
        if a.size != theta.size:
            raise QuantumError(f"|a| = {a.size} but |theta| = {theta.size}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return int(self.a.size)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BB84Secret":
        a = rng.integers(0, 2, size=n, dtype=np.uint8)
        theta = rng.integers(0, 2, size=n, dtype=np.uint8)
        return cls(a, theta)


@dataclass
class SingleQubitMeasurement:
    """
    A single-qubit POVM given as ``(label, 2x2 PSD operator)`` pairs summing
    to the identity.
    """

    outcomes: list = field(default_factory=list)

    def __post_init__(self):
        cleaned = []
        total = np.zeros((2, 2), dtype=np.complex128)
        for label, op in self.outcomes:
            op = np.asarray(op, dtype=np.complex128)
            if op.shape != (2, 2):
                raise QuantumError(f"outcome {label!r}: operator shape {op.shape}")
            if not np.allclose(op, op.conj().T, atol=PSD_TOL):
                raise QuantumError(f"outcome {label!r}: operator not Hermitian")
            if np.linalg.eigvalsh(op).min() < -PSD_TOL:
                raise QuantumError(f"outcome {label!r}: operator not PSD")
            cleaned.append((label, op))
            total += op
        if not cleaned:
            raise QuantumError("measurement has no outcomes")
        if np.abs(total - np.eye(2)).max() > NORM_TOL:
            raise QuantumError("POVM elements do not sum to identity")
        labels = [lab for lab, _ in cleaned]
        if len(set(labels)) != len(labels):
            raise QuantumError("duplicate outcome labels")
        self.outcomes = cleaned

    @property
    def labels(self) -> list:
        return [lab for lab, _ in self.outcomes]

    def kraus(self) -> list:
        """Square roots of the POVM elements."""
        out = []
        for label, op in self.outcomes:
            w, v = np.linalg.eigh(op)
            out.append((label, (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T))
        return out

    def probabilities(self, state) -> dict:
        """Born probabilities for a single-qubit pure state vector."""
        psi = np.asarray(state, dtype=np.complex128)
        return {lab: float(np.vdot(psi, op @ psi).real) for lab, op in self.outcomes}

    # -- common measurements ----------------------------------------------

    @classmethod
    def projective(cls, vector, labels: Sequence[Hashable] = (0, 1)) -> "SingleQubitMeasurement":
        """Projective measurement onto ``vector`` and its orthogonal complement."""
        v = np.asarray(vector, dtype=np.complex128)
        v = v / np.linalg.norm(v)
        perp = np.array([-np.conj(v[1]), np.conj(v[0])])
        return cls([(labels[0], np.outer(v, v.conj())),
                    (labels[1], np.outer(perp, perp.conj()))])

    @classmethod
    def bloch(cls, polar: float, azimuth: float,
              labels: Sequence[Hashable] = (0, 1)) -> "SingleQubitMeasurement":
        """Projective measurement along the Bloch direction (polar, azimuth)."""
        v = np.array([math.cos(polar / 2), np.exp(1j * azimuth) * math.sin(polar / 2)])
        return cls.projective(v, labels)

    @classmethod
    def rotated(cls, angle: float, labels: Sequence[Hashable] = (0, 1)) -> "SingleQubitMeasurement":
        """Real basis ``{cos a|0> + sin a|1>, -sin a|0> + cos a|1>}``."""
        return cls.projective([math.cos(angle), math.sin(angle)], labels)

    @classmethod
    def standard(cls, labels: Sequence[Hashable] = (0, 1)) -> "SingleQubitMeasurement":
        return cls.rotated(0.0, labels)

    @classmethod
    def hadamard(cls, labels: Sequence[Hashable] = (0, 1)) -> "SingleQubitMeasurement":
        return cls.rotated(math.pi / 4, labels)

    @classmethod
    def basis(cls, bit: int, labels: Sequence[Hashable] = (0, 1)) -> "SingleQubitMeasurement":
        return cls.hadamard(labels) if bit else cls.standard(labels)

    @classmethod
    def breidbart(cls, labels: Sequence[Hashable] = (0, 1)) -> "SingleQubitMeasurement":
        """Basis halfway between standard and Hadamard (pi/8 rotation)."""
        return cls.rotated(BREIDBART_ANGLE, labels)

    @classmethod
    def bb84_four(cls) -> "SingleQubitMeasurement":
        """Uniform mixture of the two BB84 bases; labels ``0, 1, +, -``."""
        plus = np.array([1, 1]) * SQRT_HALF
        minus = np.array([1, -1]) * SQRT_HALF
        return cls([("0", 0.5 * np.diag([1, 0])), ("1", 0.5 * np.diag([0, 1])),
                    ("+", 0.5 * np.outer(plus, plus)), ("-", 0.5 * np.outer(minus, minus))])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def basis_state(bit: int, basis: int) -> np.ndarray:
    """``H^basis |bit>`` as a length-2 vector."""
    v = np.zeros(2, dtype=np.complex128)
    v[int(bit)] = 1.0
    return HADAMARD @ v if basis else v


def prepare_bb84(secret: BB84Secret) -> QuantumRegister:
    """Tensor product of ``H^{theta_i} |a_i>``, qubit 0 most significant."""
    if secret.n > MAX_QUBITS:
        raise QuantumError(f"{secret.n} qubits exceeds cap of {MAX_QUBITS}")
    if secret.n < 1:
        raise QuantumError("need at least one qubit")
    factors = np.zeros((secret.n, 2), dtype=np.complex128)
    factors[np.arange(secret.n), secret.a] = 1.0
    factors[secret.theta == 1] = factors[secret.theta == 1] @ HADAMARD.T
    return QuantumRegister(factors=factors)


def _apply_single(state: np.ndarray, n: int, qubit: int, op: np.ndarray) -> np.ndarray:
    view = state.reshape(2**qubit, 2, 2 ** (n - qubit - 1))
    return np.einsum("ij,ajb->aib", op, view).reshape(-1)


def apply_hadamards(state: np.ndarray, mask) -> np.ndarray:
    """Apply H on every qubit whose mask bit is 1 (returns a new vector)."""
    mask = as_bits(mask)
    n = mask.size
    out = np.array(state, dtype=np.complex128, copy=True)
    for q in np.flatnonzero(mask):
        view = out.reshape(2**q, 2, 2 ** (n - q - 1))
        a0, a1 = view[:, 0, :].copy(), view[:, 1, :].copy()
        view[:, 0, :] = (a0 + a1) * SQRT_HALF
        view[:, 1, :] = (a0 - a1) * SQRT_HALF
    return out


def index_to_bits(index: int, n: int) -> np.ndarray:
    return np.array([(index >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8)


def measure_in_bases(reg: QuantumRegister, bases, rng: np.random.Generator) -> np.ndarray:
    """
    Measure qubit i in the standard basis (bit 0) or Hadamard basis (bit 1).

    Consumes the register.
    """
    reg.require_alive()
    bases = as_bits(bases)
    if bases.size != reg.n:
        raise QuantumError(f"{bases.size} basis bits for {reg.n} qubits")
    if reg.is_product:
        rotated = np.where(bases[:, None] == 1, reg.factors @ HADAMARD.T, reg.factors)
        p_one = np.abs(rotated[:, 1]) ** 2
        reg.kill()
        return (rng.random(reg.n) < p_one).astype(np.uint8)
    rotated = apply_hadamards(reg.amplitudes, bases)
    probs = np.abs(rotated) ** 2
    probs /= probs.sum()
    reg.kill()
    idx = int(rng.choice(probs.size, p=probs))
    return index_to_bits(idx, reg.n)


def _check_povms(reg: QuantumRegister, per_qubit: Sequence[SingleQubitMeasurement]) -> None:
    reg.require_alive()
    if len(per_qubit) != reg.n:
        raise QuantumError(f"{len(per_qubit)} measurements for {reg.n} qubits")
    for m in per_qubit:
        if not isinstance(m, SingleQubitMeasurement):
            raise QuantumError("per-qubit measurement must be a SingleQubitMeasurement")


def outcome_distribution(reg: QuantumRegister,
                         per_qubit: Sequence[SingleQubitMeasurement]) -> JointDistribution:
    """
    Exact joint outcome table of a product POVM; the register is not consumed.

    Branches over outcomes qubit by qubit, applying the Kraus square roots;
    cost grows as the product of outcome counts times ``2^n``.
    """
    _check_povms(reg, per_qubit)
    n = reg.n
    branches = {(): reg.amplitudes}
    for q, meas in enumerate(per_qubit):
        nxt = {}
        for key, vec in branches.items():
            for label, k in meas.kraus():
                out = _apply_single(vec, n, q, k)
                if np.vdot(out, out).real > 0:
                    nxt[key + (label,)] = out
        branches = nxt
    probs = {key: float(np.vdot(v, v).real) for key, v in branches.items()}
    alphabets = [m.labels for m in per_qubit]
    shape = tuple(len(a) for a in alphabets)
    table = np.zeros(shape)
    index = [{lab: i for i, lab in enumerate(a)} for a in alphabets]
    for key, p in probs.items():
        table[tuple(index[i][lab] for i, lab in enumerate(key))] = p
    table /= table.sum()
    return JointDistribution(tuple(f"q{i}" for i in range(n)), alphabets, table)


def measure_product_povm(reg: QuantumRegister, per_qubit: Sequence[SingleQubitMeasurement],
                         rng: np.random.Generator) -> list:
    """Sample a joint outcome of a product POVM and consume the register."""
    if reg.is_product:
        reg.require_alive()
        if len(per_qubit) != reg.n:
            raise QuantumError(f"{len(per_qubit)} measurements for {reg.n} qubits")
        out = []
        for m, psi in zip(per_qubit, reg.factors):
            probs = np.array(list(m.probabilities(psi).values()))
            k = min(int(np.searchsorted(np.cumsum(probs / probs.sum()), rng.random(), "right")),
                    probs.size - 1)
            out.append(m.labels[k])
        reg.kill()
        return out
    dist = outcome_distribution(reg, per_qubit)
    reg.kill()
    flat = dist.probs.reshape(-1)
    idx = int(rng.choice(flat.size, p=flat / flat.sum()))
    pos = np.unravel_index(idx, dist.probs.shape)
    return [dist.alphabets[i][j] for i, j in enumerate(pos)]


def bell_pairs(n: int) -> QuantumRegister:
    """
    Maximally entangled state on ``2n`` qubits: qubits ``0..n-1`` (A) and
    ``n..2n-1`` (D), ``2^(-n/2) sum_x |x>_A |x>_D``.
    """
    if 2 * n > MAX_QUBITS:
        raise QuantumError("entangled register exceeds qubit cap")
    dim = 2**n
    amps = np.zeros(dim * dim, dtype=np.complex128)
    amps[np.arange(dim) * dim + np.arange(dim)] = 1 / math.sqrt(dim)
    return QuantumRegister(amps)


def all_secrets(n: int):
    """Every ``(a, theta)`` pair on ``n`` qubits."""
    for a in itertools.product((0, 1), repeat=n):
        for t in itertools.product((0, 1), repeat=n):
            yield BB84Secret(np.array(a, dtype=np.uint8), np.array(t, dtype=np.uint8))
