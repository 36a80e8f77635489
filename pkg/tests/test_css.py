from fractions import Fraction

import numpy as np
import pytest

from app.coding.construct import EfficientEncoder, SystematicEncoder, apply_mask, build_base, load_mask
from app.coding.css import (
    CssConstructionError,
    CssPair,
    build_css,
    coset_equal,
    css_rate,
    make_key_map,
    select_columns,
    verify_css,
)
from app.coding.gf2 import BinMatrix, gf2_product, in_rowspace, rank


def random_c2_element(pair, rng):
    coefficients = (rng.random(pair.m) < 0.5).astype(np.uint8)
    return gf2_product(coefficients[None, :], pair.h2.bits)[0]


def random_c1_codeword(pair, rng):
    coefficients = (rng.random(pair.g1.rows) < 0.5).astype(np.uint8)
    return gf2_product(coefficients[None, :], pair.g1.bits)[0]


class TestBuildCss:
    def test_smallest_instance(self):
        h1 = BinMatrix([[1, 1]])
        pair = build_css(h1, SystematicEncoder(h1))
        assert pair.selected_columns.tolist() == [0]
        assert pair.h2.bits.tolist() == [[1, 1]]
        assert pair.css_dimension == 0
        assert css_rate(pair) == 0

    def test_toy_pair(self, toy_code):
        pair = build_css(toy_code.h, EfficientEncoder(toy_code))
        assert pair.h2.shape == (6, 12)
        assert not gf2_product(toy_code.h.bits, pair.h2.bits.T).any()
        assert verify_css(pair).passed
        assert pair.rank_h2 == 6
        assert pair.css_dimension == 0

    def test_lightest_columns_cover_the_parity_part(self, small_code, small_pair):
        assert small_pair.selected_columns.tolist() == list(range(15))
        assert not small_pair.deficient
        assert small_pair.css_dimension == 25 - 2 * 10

    def test_header_lists_selected_columns(self, small_pair):
        assert small_pair.header()["selected_columns"] == list(range(15))
        h = BinMatrix([[1, 1], [0, 0]])
        assert CssPair(h, h).header()["selected_columns"] == []

    def test_heaviest_variant(self, small_code):
        chosen = select_columns(small_code.h, 15, "heaviest")
        assert len(chosen) == 15
        pair = build_css(small_code.h, EfficientEncoder(small_code), "heaviest")
        assert verify_css(pair).passed

    def test_rank_deficient_h1(self):
        h1 = BinMatrix([[1, 1, 0], [1, 1, 0]])
        with pytest.raises(CssConstructionError, match="full row rank"):
            build_css(h1, SystematicEncoder(h1))

    def test_inconsistent_encoder(self, small_code):
        class Broken(EfficientEncoder):
            def encode(self, messages):
                words = super().encode(messages)
                words[:, 0] ^= 1
                return words

        with pytest.raises(CssConstructionError, match="violates h1"):
            build_css(small_code.h, Broken(small_code))

    def test_b08_rate(self):
        code = apply_mask(build_base(59, 8, 29), load_mask("B/0.8"))
        pair = build_css(code.h, EfficientEncoder(code))
        assert verify_css(pair).passed
        assert pair.rank_h2 == 472
        assert css_rate(pair) == Fraction(1239, 2183)
        assert css_rate(pair) == 2 * code.rate - 1


class TestVerifyCss:
    def test_flipped_bit_is_named(self, small_pair):
        bits = np.array(small_pair.h2.bits, copy=True)
        bits[3, 7] ^= 1
        report = verify_css(CssPair(small_pair.h1, BinMatrix(bits)))
        assert not report.passed
        assert report.offending_rows == [3]
        assert "FAIL" in report.summary()

    def test_self_orthogonal_input(self):
        h = BinMatrix([[1, 1], [0, 0]])
        assert verify_css(CssPair(h, h)).passed
        h = BinMatrix([[1, 0], [0, 0]])
        assert not verify_css(CssPair(h, h)).passed


class TestKeyMap:
    def test_key_length(self, small_pair, small_keymap):
        assert small_keymap.key_len == 5
        assert small_keymap.matrix.shape == (5, 25)

    def test_c2_maps_to_zero(self, small_pair, small_keymap, rng):
        for _ in range(20):
            assert not small_keymap.key(random_c2_element(small_pair, rng)).any()

    def test_well_defined_on_cosets(self, small_pair, small_keymap, rng):
        for _ in range(1000):
            u = random_c1_codeword(small_pair, rng)
            w = random_c2_element(small_pair, rng)
            assert np.array_equal(small_keymap.key(u), small_keymap.key(u ^ w))

    def test_exhaustive_buckets(self, small_code, small_pair, small_keymap):
        k = 15
        messages = ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).astype(np.uint8)
        words = EfficientEncoder(small_code).encode(messages)
        keys = small_keymap.key(words)
        packed = keys.astype(np.int64) @ (1 << np.arange(5))
        counts = np.bincount(packed, minlength=32)
        assert counts.tolist() == [1 << 10] * 32

    def test_rejects_rank_deficient_h2(self):
        h1 = BinMatrix([[1, 1, 0, 0], [0, 0, 1, 1]])
        h2 = BinMatrix([[1, 1, 0, 0], [1, 1, 0, 0]])
        with pytest.raises(CssConstructionError, match="rank"):
            make_key_map(CssPair(h1, h2))


class TestCosetEqual:
    def test_definitional_cases(self, small_pair, rng):
        u = random_c1_codeword(small_pair, rng)
        assert coset_equal(small_pair, u, u)
        assert coset_equal(small_pair, u, u ^ small_pair.h2.bits[4])

    def test_agrees_with_keys(self, small_pair, small_keymap, rng):
        for _ in range(200):
            a = random_c1_codeword(small_pair, rng)
            b = random_c1_codeword(small_pair, rng)
            same_key = np.array_equal(small_keymap.key(a), small_keymap.key(b))
            assert coset_equal(small_pair, a, b) == same_key

    def test_dual_quotient(self, small_pair, rng):
        g = small_pair.g2perp
        coefficients = (rng.random(g.rows) < 0.5).astype(np.uint8)
        a = gf2_product(coefficients[None, :], g.bits)[0]
        b = a ^ small_pair.h1.bits[2]
        assert coset_equal(small_pair, a, b, "C2perp/C1perp")
        assert in_rowspace(small_pair.h1, a ^ b)

    def test_membership_precondition(self, small_pair):
        outside = np.zeros(25, dtype=np.uint8)
        outside[0] = 1
        with pytest.raises(CssConstructionError):
            coset_equal(small_pair, outside, outside)

    def test_brute_force_on_toy_code(self, toy_code, rng):
        pair = build_css(toy_code.h, EfficientEncoder(toy_code))
        g = pair.g1.bits
        codewords = ((np.arange(64)[:, None] >> np.arange(6)) & 1).astype(np.int64) @ g.astype(np.int64) % 2
        codewords = codewords.astype(np.uint8)
        # dimension C1 = 6 = rank(h2): every pair of codewords is in one coset
        assert rank(pair.h2) == 6
        for a in codewords[::7]:
            for b in codewords[::5]:
                assert coset_equal(pair, a, b)
