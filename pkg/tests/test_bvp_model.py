import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvbvp.bvp import (
    BVPSpec,
    CurvatureOperator,
    FSpec,
    check_hypotheses,
    compute_Lc,
    lc_details,
    linearized_majorant,
    sine_cubic_problem,
)
from curvbvp.errors import DomainError, HypothesisViolatedError, InvalidParameterError, UnboundedRatioError
from curvbvp.seq_core import SeqFamily

OP = CurvatureOperator


class TestCurvatureOperator:
    def test_values(self):
        assert OP.phi(0.0) == 0.0
        assert OP.phi(1.0) == pytest.approx(1 / math.sqrt(2))
        assert OP.J(0.0) == 1.0
        assert OP.phi(1e200) == pytest.approx(1.0)

    @given(st.floats(-1e6, 1e6))
    def test_phi_is_v_times_J_and_inverts(self, v):
        assert OP.phi(v) == pytest.approx(v * OP.J(v), rel=1e-15, abs=1e-300)
        assert abs(OP.phi(v)) < 1.0
        if abs(v) < 1e4:
            assert float(OP.inverse_phi(OP.phi(v))) == pytest.approx(v, rel=1e-9, abs=1e-12)

    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_phi_increasing(self, u, v):
        if u < v:
            assert OP.phi(u) <= OP.phi(v)

    def test_inverse_domain(self):
        with pytest.raises(DomainError):
            OP.inverse_phi(1.0)


class TestFSpec:
    def test_odd_extension(self):
        for F in (FSpec.power(3.0), FSpec.power(0.5), FSpec.linear(), FSpec.custom("u + u**3"),
                  FSpec.table([1.0, 2.0], [1.0, 3.0])):
            u = np.array([0.3, 0.7, 1.5])
            np.testing.assert_allclose(F(-u), -F(u))

    def test_table_interpolation_and_domain(self):
        F = FSpec.table([1.0, 2.0], [0.5, 3.0])
        assert F(0.5) == 0.25 and F(1.5) == 1.75
        with pytest.raises(DomainError):
            F(2.5)

    def test_ratio_at_zero(self):
        assert FSpec.power(3.0).ratio_at_zero().value == 0.0
        assert FSpec.linear().ratio_at_zero().value == 1.0
        assert FSpec.power(0.5).ratio_at_zero().status == "unbounded"
        lim = FSpec.custom("u/(1+u)").ratio_at_zero()
        assert lim.status == "limit" and lim.value == pytest.approx(1.0, abs=1e-12)
        assert FSpec.custom("sqrt(u)").ratio_at_zero().status == "unbounded"
        assert FSpec.custom("u*(2 + sin(1/u))").ratio_at_zero().status == "oscillatory"

    def test_ratio_function(self):
        F = FSpec.custom("2*u + u**2")
        np.testing.assert_allclose(F.ratio(np.array([0.0, 0.5])), [2.0, 2.5], rtol=1e-9)

    def test_dict_round_trip(self):
        for F in (FSpec.power(3.0), FSpec.linear(), FSpec.custom("sin(u)"), FSpec.table([1.0], [2.0])):
            assert FSpec.from_dict(F.to_dict()) == F

    @pytest.mark.parametrize("data", [
        {"kind": "power"},
        {"kind": "power", "gamma": -1.0},
        {"kind": "linear", "gamma": 2.0},
        {"kind": "table", "nodes": [2.0, 1.0], "values": [1.0, 1.0]},
        {"kind": "table", "nodes": [1.0], "values": []},
        {"kind": "custom", "expr": "k*u"},
        {"kind": "quadratic"},
    ])
    def test_invalid(self, data):
        with pytest.raises(InvalidParameterError):
            FSpec.from_dict(data)


class TestLc:
    def test_closed_forms(self):
        assert compute_Lc(FSpec.power(3.0), 2.0) == 4.0
        assert compute_Lc(FSpec.linear(), 7.0) == 1.0
        assert compute_Lc(FSpec.power(0.5), 1.0) == math.inf
        assert lc_details(FSpec.power(3.0), 1.0).method == "closed-form"

    @pytest.mark.parametrize("expr, c, expected", [
        ("u/(1+u)", 3.0, 1.0),
        ("sin(u)", 2.0, 1.0),
        ("u + u**2", 1.5, 2.5),
        ("u*exp(-(u-1)**2)", 3.0, 1.0),
    ])
    def test_grid(self, expr, c, expected):
        res = lc_details(FSpec.custom(expr), c)
        assert res.method == "grid" and res.value == pytest.approx(expected, rel=1e-6)

    def test_table_max_at_node(self):
        F = FSpec.table([1.0, 2.0, 3.0], [0.5, 3.0, 3.3])
        assert compute_Lc(F, 3.0) == pytest.approx(1.5, rel=1e-9)

    def test_unbounded_raises(self):
        with pytest.raises(UnboundedRatioError):
            lc_details(FSpec.custom("sqrt(u)"), 1.0)
        with pytest.raises(InvalidParameterError):
            lc_details(FSpec.linear(), 0.0)


class TestSpec:
    def test_sine_cubic_data(self):
        spec = sine_cubic_problem(0.5)
        assert spec.a(3) == 16.0
        assert spec.b(2) == pytest.approx(abs(math.sin(2)) / (4 * math.sqrt(2) * 2))
        assert spec.M == pytest.approx(1 / math.sqrt(1.25))
        assert spec.with_c(2.0).c == 2.0 and spec.c == 0.5

    def test_fingerprint_tracks_data(self):
        a, b = sine_cubic_problem(1.0), sine_cubic_problem(2.0)
        assert a.fingerprint() == sine_cubic_problem(1.0).fingerprint() != b.fingerprint()
        assert a.to_dict()["F"] == {"kind": "power", "gamma": 3.0}

    def test_linearized_majorant(self):
        spec = sine_cubic_problem(1.0)
        eq = linearized_majorant(spec)
        eqs = linearized_majorant(spec, scaled=True)
        assert eq.r(1) == pytest.approx(4 / math.sqrt(2))
        assert eq.p(1) == pytest.approx(spec.b(1))
        assert eqs.r(1) == 4.0 and eqs.p(1) == pytest.approx(math.sqrt(2) * spec.b(1))
        bad = BVPSpec.from_families(SeqFamily.power(2.0, 1.0), SeqFamily.constant(1.0), FSpec.power(0.5), 1, 1.0)
        with pytest.raises(HypothesisViolatedError):
            linearized_majorant(bad)

    def test_b_vanishes(self):
        spec = BVPSpec.from_families(SeqFamily.power(2.0, 1.0), SeqFamily.constant(0.0), FSpec.linear(), 1, 1.0)
        assert spec.b_vanishes(100) and not sine_cubic_problem().b_vanishes(100)


class TestHypotheses:
    def test_sine_cubic_passes(self):
        rep = check_hypotheses(sine_cubic_problem(1.0))
        assert rep.all_pass and rep.ok and rep.failed == []

    def test_each_failure(self):
        harmonic_a = BVPSpec.from_families(SeqFamily.power(1.0), SeqFamily.constant(0.1), FSpec.linear(), 1, 1.0)
        rep = check_hypotheses(harmonic_a, 1 << 14)
        assert rep.failed == ["reciprocal_a_summable"]
        assert rep.items["weighted_tail_summable"].status == "inconclusive"

        heavy_b = BVPSpec.from_families(SeqFamily.power(2.0, 1.0), SeqFamily.power(1.0), FSpec.linear(), 1, 1.0)
        assert check_hypotheses(heavy_b, 1 << 14).failed == ["weighted_tail_summable"]

        sublinear = BVPSpec.from_families(SeqFamily.power(2.0, 1.0), SeqFamily.power(-2.0), FSpec.power(0.5), 1, 1.0)
        assert check_hypotheses(sublinear, 1 << 14).failed == ["sign_condition"]

        wrong_sign = BVPSpec.from_families(SeqFamily.power(2.0, 1.0), SeqFamily.power(-2.0),
                                           FSpec.custom("u*(u - 0.5)"), 1, 1.0)
        rep = check_hypotheses(wrong_sign, 1 << 14)
        assert rep.failed == ["sign_condition"] and rep.items["sign_condition"].evidence["first_bad_u"] is not None

    def test_report_serializes(self):
        d = check_hypotheses(sine_cubic_problem(1.0)).to_dict()
        assert set(d) == {"reciprocal_a_summable", "weighted_tail_summable", "sign_condition"}
