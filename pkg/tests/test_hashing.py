"""Toeplitz universal hashing."""

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amnesic.hashing import (
    HashDescriptor,
    HashError,
    all_seeds,
    collision_probability_exact,
    eval_hash,
    hash_table,
    pad_input,
    padded_length,
    sample_hash,
    seed_length,
)
from amnesic.quantum import as_bits


def brute_force_hash(seed, x, max_input_len, ell):
    """Independent oracle: build the Toeplitz matrix element by element."""
    w = max(1, (max_input_len).bit_length())
    x = [int(c) for c in x]
    pad = x + [0] * (max_input_len - len(x)) + [int(c) for c in format(len(x), f"0{w}b")]
    seed = [int(c) for c in seed]
    out = []
    for i in range(ell):
        row = [seed[j - i + ell - 1] for j in range(len(pad))]
        out.append(sum(r * p for r, p in zip(row, pad)) % 2)
    return out


def strings_up_to(n):
    return ["".join(b) for k in range(n + 1) for b in itertools.product("01", repeat=k)]


class TestParameters:
    def test_seed_length_4_2(self):
        assert padded_length(4) == 7
        assert seed_length(4, 2) == 8

    def test_seed_length_1_1(self):
        assert seed_length(1, 1) == 2

    def test_sample_is_deterministic(self):
        a = sample_hash(4, 2, np.random.default_rng(9))
        b = sample_hash(4, 2, np.random.default_rng(9))
        assert a == b

    @pytest.mark.parametrize("args", [(0, 1), (4, 0), (4, 65)])
    def test_rejects_bad_lengths(self, args):
        with pytest.raises(HashError):
            sample_hash(*args, np.random.default_rng(0))

    def test_rejects_wrong_seed_size(self):
        with pytest.raises(HashError):
            HashDescriptor(4, 2, np.zeros(7, dtype=np.uint8))


class TestEval:
    def test_golden_example(self):
        h = HashDescriptor(4, 2, as_bits("10110010"))
        out = eval_hash(h, "101")
        assert list(out) == brute_force_hash("10110010", "101", 4, 2)
        assert "".join(map(str, out)) == "01"

    def test_matches_oracle_exhaustively(self):
        for seed in ("00000000", "11111111", "01101001", "10000001"):
            h = HashDescriptor(4, 2, as_bits(seed))
            for x in strings_up_to(4):
                assert list(eval_hash(h, x)) == brute_force_hash(seed, x, 4, 2)

    def test_zero_seed_gives_zero(self):
        h = HashDescriptor(5, 3, np.zeros(seed_length(5, 3), dtype=np.uint8))
        for x in strings_up_to(5):
            assert not eval_hash(h, x).any()

    def test_padding_injective(self):
        pads = {pad_input(x, 5).tobytes() for x in strings_up_to(5)}
        assert len(pads) == len(strings_up_to(5))

    def test_empty_and_zero_distinguished(self):
        assert not np.array_equal(pad_input("", 3), pad_input("0", 3))

    def test_input_too_long(self):
        with pytest.raises(HashError):
            eval_hash(sample_hash(3, 1, np.random.default_rng(0)), "0000")

    def test_linearity_on_pads(self, rng):
        h = sample_hash(6, 3, rng)
        m = h.matrix().astype(int)
        for x, y in itertools.combinations(["", "1", "0110", "111111", "01"], 2):
            px, py = pad_input(x, 6).astype(int), pad_input(y, 6).astype(int)
            lhs = m @ ((px + py) % 2) % 2
            rhs = (eval_hash(h, x).astype(int) + eval_hash(h, y).astype(int)) % 2
            assert np.array_equal(lhs, rhs)

    def test_table_matches_eval(self):
        xs = strings_up_to(2)
        table = hash_table(2, 2, xs)
        for s, seed in enumerate(all_seeds(2, 2)):
            h = HashDescriptor(2, 2, seed)
            for j, x in enumerate(xs):
                bits = eval_hash(h, x)
                assert table[s, j] == 2 * bits[0] + bits[1]


class TestUniversality:
    def test_max3_ell2_all_pairs(self):
        for x, y in itertools.combinations(strings_up_to(3), 2):
            assert collision_probability_exact(3, 2, x, y) == Fraction(1, 4)

    def test_identical_inputs(self):
        assert collision_probability_exact(3, 2, "01", "01") == 1

    def test_max2_ell1_example(self):
        assert collision_probability_exact(2, 1, "0", "1") == Fraction(1, 2)

    def test_every_pair_every_small_family(self):
        for n, ell in ((1, 1), (2, 3), (4, 1)):
            xs = strings_up_to(n)
            table = hash_table(n, ell, xs)
            for i, j in itertools.combinations(range(len(xs)), 2):
                assert np.mean(table[:, i] == table[:, j]) == 2.0**-ell

    def test_enumeration_cap(self):
        with pytest.raises(HashError):
            collision_probability_exact(30, 4, "0", "1")


class TestWire:
    def test_layout(self):
        h = HashDescriptor(4, 2, as_bits("10110010"))
        assert h.to_bytes() == bytes([0, 4, 0, 2, 0b10110010])

    def test_trailing_bits_zero_padded(self):
        h = HashDescriptor(1, 1, as_bits("11"))
        assert h.to_bytes() == bytes([0, 1, 0, 1, 0b11000000])

    def test_rejects_truncated(self):
        with pytest.raises(HashError):
            HashDescriptor.from_bytes(bytes([0, 4, 0, 2]))

    def test_rejects_nonzero_padding(self):
        with pytest.raises(HashError):
            HashDescriptor.from_bytes(bytes([0, 1, 0, 1, 0b11000001]))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 40), st.integers(1, 16), st.integers(0, 2**32 - 1))
    def test_round_trip(self, n, ell, seed):
        h = sample_hash(n, ell, np.random.default_rng(seed))
        data = h.to_bytes()
        assert len(data) == HashDescriptor.wire_size(n, ell)
        assert HashDescriptor.from_bytes(data) == h
