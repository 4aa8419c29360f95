"""
Protocol messages, their binary encoding, and transcripts.

Frame layout (all integers big-endian)::

    kind      u8     1 = QUANTUM, 2 = STALL, 3 = CLASSICAL
    dir_len   u8     length of the direction string
    direction ascii  "<src>-><dst>"
    length    u32    payload length
    payload   bytes

CLASSICAL payloads start with a tag byte:

    0x01 REVEAL   b:u8, sigma:bits
    0x02 HASHES   <h0>:u16-prefixed, <h1>:u16-prefixed, theta:bits
    0x03 COINBIT  b:u8
    0x04 MASKED   e0:bits, e1:bits

where ``bits`` is a u16 bit count followed by MSB-first packed bytes.

QUANTUM payloads are ``n:u8``, ``form:u8`` and then amplitudes as
little-endian float64 (real, imag) pairs: ``2^n`` of them for form 0 (dense
state vector), ``2n`` for form 1 (product state, one 2-vector per qubit in
qubit order). This is a simulation artifact, not a physical encoding.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .hashing import HashDescriptor, pack_bits, unpack_bits
from .quantum import QuantumError, QuantumRegister, as_bits


class WireError(ValueError):
    pass


class Kind(enum.IntEnum):
    QUANTUM = 1
    STALL = 2
    CLASSICAL = 3


class Tag(enum.IntEnum):
    REVEAL = 0x01
    HASHES = 0x02
    COINBIT = 0x03
    MASKED = 0x04


def _encode_bits(bits) -> bytes:
    bits = as_bits(bits)
    return struct.pack(">H", bits.size) + pack_bits(bits)


def _decode_bits(buf: bytes, pos: int) -> tuple[np.ndarray, int]:
    if pos + 2 > len(buf):
        raise WireError("truncated bit field")
    (n,) = struct.unpack_from(">H", buf, pos)
    pos += 2
    nbytes = (n + 7) // 8
    if pos + nbytes > len(buf):
        raise WireError("truncated bit field body")
    try:
        bits = unpack_bits(buf[pos:pos + nbytes], n) if n else np.zeros(0, dtype=np.uint8)
    except ValueError as exc:
        raise WireError(str(exc)) from exc
    return bits, pos + nbytes


def _encode_blob(data: bytes) -> bytes:
    return struct.pack(">H", len(data)) + data


def _decode_blob(buf: bytes, pos: int) -> tuple[bytes, int]:
    if pos + 2 > len(buf):
        raise WireError("truncated blob")
    (n,) = struct.unpack_from(">H", buf, pos)
    pos += 2
    if pos + n > len(buf):
        raise WireError("truncated blob body")
    return bytes(buf[pos:pos + n]), pos + n


@dataclass
class Message:
    """
    One protocol message.

    ``register`` is set on a delivered QUANTUM message and never serialized;
    it is the recipient's handle on the received state.
    """

    kind: Kind
    direction: str
    payload: bytes = b""
    register: QuantumRegister | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.kind = Kind(self.kind)
        if "->" not in self.direction:
            raise WireError(f"direction {self.direction!r} is not '<src>-><dst>'")
        if self.kind == Kind.STALL and self.payload:
            raise WireError("STALL carries no payload")

    @property
    def source(self) -> str:
        return self.direction.split("->")[0]

    @property
    def destination(self) -> str:
        return self.direction.split("->")[1]

    # -- constructors -----------------------------------------------------

    @classmethod
    def quantum(cls, reg: QuantumRegister, direction: str) -> "Message":
        reg.require_alive()
        return cls(Kind.QUANTUM, direction, encode_register(reg), register=reg)

    @classmethod
    def stall(cls, direction: str) -> "Message":
        return cls(Kind.STALL, direction)

    @classmethod
    def reveal(cls, b: int, sigma, direction: str) -> "Message":
        return cls(Kind.CLASSICAL, direction,
                   bytes([Tag.REVEAL, int(b) & 1]) + _encode_bits(sigma))

    @classmethod
    def hashes(cls, h0: HashDescriptor, h1: HashDescriptor, theta, direction: str) -> "Message":
        body = _encode_blob(h0.to_bytes()) + _encode_blob(h1.to_bytes()) + _encode_bits(theta)
        return cls(Kind.CLASSICAL, direction, bytes([Tag.HASHES]) + body)

    @classmethod
    def coinbit(cls, b: int, direction: str) -> "Message":
        return cls(Kind.CLASSICAL, direction, bytes([Tag.COINBIT, int(b) & 1]))

    @classmethod
    def masked(cls, e0, e1, direction: str) -> "Message":
        return cls(Kind.CLASSICAL, direction,
                   bytes([Tag.MASKED]) + _encode_bits(e0) + _encode_bits(e1))

    # -- decoding ---------------------------------------------------------

    def body(self) -> tuple[Tag, dict]:
        """Decode a CLASSICAL payload into ``(tag, fields)``."""
        if self.kind != Kind.CLASSICAL:
            raise WireError(f"{self.kind.name} message has no classical body")
        return decode_classical(self.payload)

    def to_bytes(self) -> bytes:
        d = self.direction.encode("ascii")
        if len(d) > 255:
            raise WireError("direction string too long")
        return bytes([self.kind, len(d)]) + d + struct.pack(">I", len(self.payload)) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Message":
        msg, end = cls.read(data, 0)
        if end != len(data):
            raise WireError("trailing bytes after message")
        return msg

    @classmethod
    def read(cls, data: bytes, pos: int) -> tuple["Message", int]:
        if pos + 2 > len(data):
            raise WireError("truncated frame header")
        kind, dlen = data[pos], data[pos + 1]
        pos += 2
        try:
            kind = Kind(kind)
        except ValueError:
            raise WireError(f"unknown message kind {kind}") from None
        direction = data[pos:pos + dlen].decode("ascii")
        pos += dlen
        if pos + 4 > len(data):
            raise WireError("truncated length field")
        (n,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + n > len(data):
            raise WireError("truncated payload")
        payload = bytes(data[pos:pos + n])
        msg = cls(kind, direction, payload)
        if kind == Kind.CLASSICAL:
            decode_classical(payload)
        elif kind == Kind.QUANTUM:
            decode_register(payload)
        return msg, pos + n


def decode_classical(payload: bytes) -> tuple[Tag, dict]:
    if not payload:
        raise WireError("empty classical payload")
    try:
        tag = Tag(payload[0])
    except ValueError:
        raise WireError(f"unknown classical tag {payload[0]:#x}") from None
    pos = 1
    if tag == Tag.REVEAL:
        if len(payload) < 2:
            raise WireError("truncated REVEAL")
        b = payload[1]
        sigma, pos = _decode_bits(payload, 2)
        fields = {"b": int(b), "sigma": sigma}
    elif tag == Tag.HASHES:
        h0, pos = _decode_blob(payload, pos)
        h1, pos = _decode_blob(payload, pos)
        theta, pos = _decode_bits(payload, pos)
        try:
            fields = {"h0": HashDescriptor.from_bytes(h0), "h1": HashDescriptor.from_bytes(h1),
                      "theta": theta}
        except ValueError as exc:
            raise WireError(f"malformed hash descriptor: {exc}") from exc
    elif tag == Tag.COINBIT:
        if len(payload) < 2:
            raise WireError("truncated COINBIT")
        fields = {"b": int(payload[1])}
        pos = 2
    else:
        e0, pos = _decode_bits(payload, pos)
        e1, pos = _decode_bits(payload, pos)
        fields = {"e0": e0, "e1": e1}
    if pos != len(payload):
        raise WireError(f"{tag.name} payload has trailing bytes")
    return tag, fields


DENSE, PRODUCT = 0, 1


def encode_register(reg: QuantumRegister) -> bytes:
    if reg.is_product:
        body = np.ascontiguousarray(reg.factors, dtype="<c16").reshape(-1)
        return bytes([reg.n, PRODUCT]) + body.tobytes()
    amps = np.ascontiguousarray(reg.amplitudes, dtype="<c16")
    return bytes([reg.n, DENSE]) + amps.tobytes()


def decode_register(payload: bytes) -> QuantumRegister:
    if len(payload) < 2:
        raise WireError("truncated quantum payload")
    n, form = payload[0], payload[1]
    body = payload[2:]
    if form not in (DENSE, PRODUCT):
        raise WireError(f"unknown register form {form}")
    count = 2**n if form == DENSE else 2 * n
    if len(body) != 16 * count:
        raise WireError(f"quantum payload has {len(body)} bytes for {n} qubits")
    values = np.frombuffer(body, dtype="<c16").astype(np.complex128)
    try:
        if form == PRODUCT:
            return QuantumRegister(factors=values.reshape(n, 2))
        return QuantumRegister(values)
    except QuantumError as exc:
        raise WireError(str(exc)) from exc


@dataclass
class TranscriptEntry:
    step: int
    message: Message
    forced_measurements: int = 0


class Transcript:
    """Ordered message log with per-direction classical byte counters."""

    def __init__(self):
        self.entries: list[TranscriptEntry] = []
        self.classical_bytes: dict[str, int] = {}
        self.marks: dict[str, dict[str, int]] = {}

    def record(self, msg: Message, forced: int = 0) -> TranscriptEntry:
        entry = TranscriptEntry(len(self.entries), msg, forced)
        self.entries.append(entry)
        if msg.kind == Kind.CLASSICAL:
            self.classical_bytes[msg.direction] = (
                self.classical_bytes.get(msg.direction, 0) + len(msg.payload))
        return entry

    def mark(self, phase: str) -> None:
        """Snapshot the byte counters at a phase boundary."""
        self.marks[phase] = dict(self.classical_bytes)

    def bytes_sent(self, direction: str, at: str | None = None) -> int:
        counters = self.marks[at] if at is not None else self.classical_bytes
        return counters.get(direction, 0)

    def recount(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.entries:
            if e.message.kind == Kind.CLASSICAL:
                out[e.message.direction] = out.get(e.message.direction, 0) + len(e.message.payload)
        return out

    @property
    def forced_measurements(self) -> int:
        return sum(e.forced_measurements for e in self.entries)

    def to_records(self) -> list[dict[str, Any]]:
        return [{"step": e.step, "direction": e.message.direction, "kind": e.message.kind.name,
                 "payload_hex": e.message.payload.hex(),
                 "forced_measurements": e.forced_measurements} for e in self.entries]

    def to_json(self) -> str:
        return json.dumps(self.to_records(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        t = cls()
        for rec in json.loads(text):
            msg = Message(Kind[rec["kind"]], rec["direction"], bytes.fromhex(rec["payload_hex"]))
            t.record(msg, rec["forced_measurements"])
        return t

    def to_bytes(self) -> bytes:
        return b"".join(e.message.to_bytes() for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)
