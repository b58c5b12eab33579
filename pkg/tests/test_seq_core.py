import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvbvp.errors import DomainError, ExpressionError, InvalidParameterError, NonPositiveCoefficientError
from curvbvp.seq_core import (
    HalfLineSeq,
    SeqFamily,
    _NumpyNS,
    block_tail,
    compile_expression,
    doubling_blocks,
    log_product,
    make_seq,
    power_fit,
    power_tail_reciprocal,
    reciprocal_tails,
    tail_sum_reciprocal,
)


class TestHalfLineSeq:
    def test_values_are_memoized_and_chunk_independent(self):
        calls = []

        def fn(ks):
            calls.append(len(ks))
            return ks.astype(np.float64) ** 2

        s = HalfLineSeq(fn, 3)
        a = s.values(3, 10_000)
        b = s.values(5000, 5010)
        np.testing.assert_array_equal(b, np.arange(5000, 5011, dtype=float) ** 2)
        assert a[0] == 9.0
        n = len(calls)
        s.values(100, 200)
        assert len(calls) == n

    def test_index_below_start_rejected(self):
        s = make_seq(SeqFamily.constant(2.0), 4)
        with pytest.raises(DomainError):
            s.values(3, 5)
        with pytest.raises(DomainError):
            HalfLineSeq.from_array([1.0, 2.0], 1).values(1, 3)

    def test_from_array_and_scaled(self):
        s = HalfLineSeq.from_array([1.0, 2.0, 4.0], 2)
        assert s(3) == 2.0
        assert s.scaled(0.5).values(2, 4).tolist() == [0.5, 1.0, 2.0]

    def test_mp_matches_double(self):
        s = make_seq(SeqFamily.power(2.0, 1.0), 1)
        assert float(s.mp(10)) == s(10) == 121.0


class TestFamilies:
    @pytest.mark.parametrize("family, k, expected", [
        (SeqFamily.power(2.0, 1.0), 3, 16.0),
        (SeqFamily.power(-1.0), 4, 0.25),
        (SeqFamily.exponential(2.0, -1.0), 3, 0.125),
        (SeqFamily.constant(0.25), 9, 0.25),
        (SeqFamily.scaled_abs_sin(2.0), 2, 2.0 * abs(math.sin(2)) / 2),
        (SeqFamily.custom("k*2**(k+1)"), 3, 48.0),
        (SeqFamily("product_closed_form", {}), 3, 1.5 * 1.25),
        (SeqFamily("product_closed_form", {"difference": 1}), 2, 1.875 - 1.5),
    ])
    def test_values(self, family, k, expected):
        assert make_seq(family, 1)(k) == pytest.approx(expected, rel=1e-14)

    def test_product_closed_form_matches_gamma_far_out(self):
        s = make_seq(SeqFamily("product_closed_form", {}), 1)
        mpmath.mp.dps = 30
        for k in (200, 5000, 10**6):
            ref = mpmath.gamma(k + 0.5) / (mpmath.gamma(1.5) * mpmath.gamma(k))
            assert s(k) == pytest.approx(float(ref), rel=1e-13)

    def test_dict_round_trip(self):
        fam = SeqFamily.exponential(3.0, 0.5)
        assert SeqFamily.from_dict(fam.to_dict()) == fam

    @pytest.mark.parametrize("data", [
        {"kind": "power", "alpha": 1.0, "bogus": 1},
        {"kind": "nope"},
        {"alpha": 1.0},
    ])
    def test_from_dict_rejects(self, data):
        with pytest.raises(InvalidParameterError):
            SeqFamily.from_dict(data)

    def test_power_requires_positive_base(self):
        with pytest.raises(InvalidParameterError):
            make_seq(SeqFamily.power(2.0, -1.0), 1)


class TestExpressions:
    def test_grammar(self):
        f = compile_expression("sqrt(k) + abs(sin(pi*k)) - 2**-k")
        assert f(4.0, _NumpyNS) == pytest.approx(2.0 + abs(math.sin(4 * math.pi)) - 1 / 16)

    @pytest.mark.parametrize("text", ["__import__('os')", "k.real", "lambda: 1", "k +", "q*k"])
    def test_rejects(self, text):
        with pytest.raises(ExpressionError):
            compile_expression(text)

    def test_custom_variable(self):
        assert compile_expression("u**3", "u")(2.0, _NumpyNS) == 8.0


class TestTailSums:
    @pytest.mark.parametrize("k", [1, 10, 1000])
    def test_inverse_square_tail_matches_trigamma(self, k):
        r = make_seq(SeqFamily.power(2.0), 1)
        ts = tail_sum_reciprocal(r, k, horizon=1 << 22)
        assert ts.converged
        assert ts.value == pytest.approx(float(mpmath.psi(1, k)), rel=1e-6)

    def test_geometric_tail_exact(self):
        r = make_seq(SeqFamily.exponential(2.0), 1)
        ts = tail_sum_reciprocal(r, 5)
        assert ts.converged and ts.value == pytest.approx(2.0**-4, rel=1e-12)

    def test_harmonic_diverges(self):
        r = make_seq(SeqFamily.power(1.0), 1)
        assert not tail_sum_reciprocal(r, 1, horizon=1 << 16).converged

    def test_nonpositive_coefficient(self):
        r = make_seq(SeqFamily.custom("k - 3"), 1)
        with pytest.raises(NonPositiveCoefficientError):
            tail_sum_reciprocal(r, 1)

    def test_reciprocal_tails_vector(self):
        r = make_seq(SeqFamily.power(2.0, 1.0), 1)
        t = reciprocal_tails(r, 1, 50)
        ref = [float(mpmath.psi(1, j + 1)) for j in (1, 25, 50)]
        assert [t[0], t[24], t[49]] == pytest.approx(ref, rel=1e-7)

    def test_power_tail_reciprocal(self):
        r = make_seq(SeqFamily.power(3.0, 0.5), 1)
        N = 100
        ref = float(mpmath.zeta(3, N + 0.5))
        assert power_tail_reciprocal(r, N) == pytest.approx(ref, rel=1.0 / N**2)

    def test_power_tail_needs_alpha_above_one(self):
        with pytest.raises(DomainError):
            power_tail_reciprocal(make_seq(SeqFamily.power(0.5), 1), 64)

    def test_power_fit_recovers_shift(self):
        alpha, shift = power_fit(make_seq(SeqFamily.power(2.0, 1.0), 1), 4000)
        assert alpha == pytest.approx(2.0, rel=1e-6) and shift == pytest.approx(1.0, abs=1e-3)


def test_block_tail_geometric():
    tail, rho, ok = block_tail([1.0, 0.5])
    assert ok and rho == 0.5 and tail == 0.5
    assert not block_tail([1.0, 0.95])[2]
    assert not block_tail([1.0])[2]


def test_log_product_and_domain():
    q = make_seq(SeqFamily.constant(-0.5), 1)
    assert log_product(q, 1, 10) == pytest.approx(10 * math.log(0.5))
    with pytest.raises(DomainError):
        log_product(make_seq(SeqFamily.constant(-1.0), 1), 1, 3)


@given(st.integers(0, 500), st.integers(0, 20_000))
def test_doubling_blocks_tile(k, span):
    blocks = doubling_blocks(k, k + span)
    assert blocks[0][0] == k and len(blocks) >= 2
    assert all(a[1] == b[0] for a, b in zip(blocks, blocks[1:]))
    lengths = [b - a for a, b in blocks]
    assert all(y == 2 * x for x, y in zip(lengths, lengths[1:]))


@settings(max_examples=40, deadline=None)
@given(st.floats(1.2, 6.0), st.floats(0.0, 5.0), st.integers(1, 200))
def test_tail_sum_matches_hurwitz_zeta(alpha, shift, k):
    r = make_seq(SeqFamily.power(alpha, shift), 1)
    ts = tail_sum_reciprocal(r, k, horizon=1 << 22)
    ref = float(mpmath.zeta(alpha, k + shift))
    assert ts.converged
    assert ts.value == pytest.approx(ref, rel=5e-3)
