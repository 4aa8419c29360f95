"""
Toeplitz universal hashing over GF(2) for variable-length inputs.

Inputs of length at most ``max_input_len`` are padded injectively to
``padded_len = max_input_len + w`` bits, ``w = ceil(log2(max_input_len + 1))``:
the input, then zeros up to ``max_input_len``, then ``|x|`` as a ``w``-bit
big-endian integer. The padded vector is multiplied by an ``l x padded_len``
Toeplitz matrix ``T[i, j] = seed[j - i + l - 1]``.

Distinct inputs have distinct nonzero-difference pads, and a uniformly random
Toeplitz matrix maps any nonzero vector to a uniform output, so every pair
collides with probability exactly ``2^-l``.

Wire encoding of a descriptor: ``max_input_len`` (u16 BE), ``l`` (u16 BE),
seed bits packed MSB-first, final byte zero-padded.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .quantum import as_bits

MAX_OUT_LEN = 64
MAX_ENUM_SEED_BITS = 24


class HashError(ValueError):
    pass


def length_field_width(max_input_len: int) -> int:
    return math.ceil(math.log2(max_input_len + 1))


def padded_length(max_input_len: int) -> int:
    return max_input_len + length_field_width(max_input_len)


def seed_length(max_input_len: int, out_len: int) -> int:
    return padded_length(max_input_len) + out_len - 1


def _check_params(max_input_len: int, out_len: int) -> None:
    if max_input_len < 1 or out_len < 1:
        raise HashError("input and output lengths must be >= 1")
    if out_len > MAX_OUT_LEN:
        raise HashError(f"output length {out_len} exceeds {MAX_OUT_LEN}")
    if max_input_len > 0xFFFF:
        raise HashError("max input length does not fit the u16 wire field")


@dataclass(frozen=True)
class HashDescriptor:
    """Serializable member of the Toeplitz family."""

    max_input_len: int
    out_len: int
    seed: np.ndarray

    def __post_init__(self):
        _check_params(self.max_input_len, self.out_len)
        seed = as_bits(self.seed)
        expected = seed_length(self.max_input_len, self.out_len)
        if seed.size != expected:
            raise HashError(f"seed has {seed.size} bits, expected {expected}")
        seed.setflags(write=False)
        object.__setattr__(self, "seed", seed)

    @property
    def padded_len(self) -> int:
        return padded_length(self.max_input_len)

    def matrix(self) -> np.ndarray:
        rows = np.arange(self.out_len)[:, None]
        cols = np.arange(self.padded_len)[None, :]
        return self.seed[cols - rows + self.out_len - 1]

    def __call__(self, x) -> np.ndarray:
        return eval_hash(self, x)

    def __eq__(self, other):
        if not isinstance(other, HashDescriptor):
            return NotImplemented
        return (self.max_input_len == other.max_input_len and self.out_len == other.out_len
                and np.array_equal(self.seed, other.seed))

    def __hash__(self):
        return hash((self.max_input_len, self.out_len, self.seed.tobytes()))

    # -- wire -------------------------------------------------------------

    def to_bytes(self) -> bytes:
        return struct.pack(">HH", self.max_input_len, self.out_len) + pack_bits(self.seed)

    @classmethod
    def from_bytes(cls, data: bytes) -> "HashDescriptor":
        if len(data) < 4:
            raise HashError("descriptor shorter than its header")
        max_input_len, out_len = struct.unpack(">HH", data[:4])
        _check_params(max_input_len, out_len)
        nbits = seed_length(max_input_len, out_len)
        body = data[4:]
        if len(body) != (nbits + 7) // 8:
            raise HashError(f"descriptor body has {len(body)} bytes, expected {(nbits + 7) // 8}")
        return cls(max_input_len, out_len, unpack_bits(body, nbits))

    @staticmethod
    def wire_size(max_input_len: int, out_len: int) -> int:
        return 4 + (seed_length(max_input_len, out_len) + 7) // 8


def pack_bits(bits) -> bytes:
    return np.packbits(as_bits(bits)).tobytes()


def unpack_bits(data: bytes, nbits: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if bits.size < nbits or bits[nbits:].any():
        raise HashError("bit payload has wrong length or nonzero padding")
    return bits[:nbits].astype(np.uint8)


def pad_input(x, max_input_len: int) -> np.ndarray:
    """Injective fixed-width encoding of a string of length <= max_input_len."""
    x = as_bits(x)
    if x.size > max_input_len:
        raise HashError(f"input of length {x.size} exceeds {max_input_len}")
    width = length_field_width(max_input_len)
    out = np.zeros(padded_length(max_input_len), dtype=np.uint8)
    out[: x.size] = x
    for i in range(width):
        out[max_input_len + i] = (x.size >> (width - 1 - i)) & 1
    return out


def sample_hash(max_input_len: int, out_len: int, rng: np.random.Generator) -> HashDescriptor:
    _check_params(max_input_len, out_len)
    seed = rng.integers(0, 2, size=seed_length(max_input_len, out_len), dtype=np.uint8)
    return HashDescriptor(max_input_len, out_len, seed)


def eval_hash(h: HashDescriptor, x) -> np.ndarray:
    """``T . pad(x)`` over GF(2); returns ``out_len`` bits."""
    padded = pad_input(x, h.max_input_len)
    return (h.matrix().astype(np.int64) @ padded) % 2


def bits_to_int(bits) -> int:
    out = 0
    for b in as_bits(bits):
        out = (out << 1) | int(b)
    return out


def int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def all_seeds(max_input_len: int, out_len: int) -> np.ndarray:
    """Every seed as a row of bits, in increasing integer order."""
    nbits = seed_length(max_input_len, out_len)
    if nbits > MAX_ENUM_SEED_BITS:
        raise HashError(f"family of 2^{nbits} seeds is too large to enumerate")
    ids = np.arange(2**nbits, dtype=np.uint32)
    shifts = np.arange(nbits - 1, -1, -1, dtype=np.uint32)
    return ((ids[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def hash_table(max_input_len: int, out_len: int, inputs) -> np.ndarray:
    """
    Integer hash values for every seed (rows) and every input (columns).

    Output bits are read MSB-first.
    """
    _check_params(max_input_len, out_len)
    seeds = all_seeds(max_input_len, out_len)
    pads = np.stack([pad_input(x, max_input_len) for x in inputs]).astype(np.int64)
    plen = padded_length(max_input_len)
    rows = np.arange(out_len)[:, None]
    cols = np.arange(plen)[None, :]
    idx = cols - rows + out_len - 1                       # (l, plen)
    weights = 2 ** np.arange(out_len - 1, -1, -1, dtype=np.int64)
    out = np.zeros((seeds.shape[0], pads.shape[0]), dtype=np.int64)
    chunk = max(1, 2**20 // max(1, out_len * plen))
    for start in range(0, seeds.shape[0], chunk):
        mats = seeds[start:start + chunk][:, idx].astype(np.int64)   # (s, l, plen)
        bits = np.einsum("slp,xp->sxl", mats, pads) % 2
        out[start:start + chunk] = bits @ weights
    return out


def collision_probability_exact(max_input_len: int, out_len: int, x, x2) -> Fraction:
    """Fraction of seeds on which ``h(x) == h(x2)``, by full enumeration."""
    if np.array_equal(as_bits(x), as_bits(x2)):
        return Fraction(1)
    table = hash_table(max_input_len, out_len, [x, x2])
    return Fraction(int(np.sum(table[:, 0] == table[:, 1])), table.shape[0])
