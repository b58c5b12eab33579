import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvbvp.bvp import euler_reciprocal, linearized_majorant, sine_cubic_problem
from curvbvp.bvp.library import CUBIC, EUNEW2, GEOMETRIC
from curvbvp.errors import CannotCertifyError, PreconditionError
from curvbvp.linrec import LinearEq, recessive, solve_ivp
from curvbvp.seq_core import SeqFamily, make_seq
from curvbvp.sturm import (
    MajorantPair,
    certify_positive_decreasing,
    is_majorant,
    verify_riccati_comparison,
    verify_trec,
)
from curvbvp.suites import random_pair


def eq_from(r: str, p: str, m: int = 1, name: str = "E") -> LinearEq:
    return LinearEq(make_seq(SeqFamily.custom(r), m), make_seq(SeqFamily.custom(p), m), m, name)


class TestIsMajorant:
    def test_holds_and_margins(self):
        minor = eq_from("2*k", "1")
        major = eq_from("k", "2")
        chk = is_majorant(MajorantPair(minor, major, 1, 50))
        assert chk and chk.min_p_margin == 1.0 and chk.min_r_margin == 1.0

    def test_reports_first_failure(self):
        minor = eq_from("k", "1")
        major = eq_from("k + floor(k/7)", "2")
        chk = is_majorant(MajorantPair(minor, major, 1, 50))
        assert not chk and chk.index == 7 and chk.coefficient == "r"
        chk = is_majorant(MajorantPair(eq_from("k", "3"), major, 1, 50))
        assert chk.index == 1 and chk.coefficient == "p"

    def test_relative_slack(self):
        minor = eq_from("k", "1")
        major = eq_from("k*(1 + 1e-14)", "1")
        assert not is_majorant(MajorantPair(minor, major, 1, 10))
        assert is_majorant(MajorantPair(minor, major, 1, 10), rtol=1e-12)

    def test_range_validation(self):
        with pytest.raises(PreconditionError):
            MajorantPair(eq_from("k", "1"), eq_from("k", "1", m=3), 1, 10)
        with pytest.raises(PreconditionError):
            MajorantPair(eq_from("k", "1"), eq_from("k", "1"), 5, 4)


class TestRiccatiComparison:
    def test_equation_against_itself(self):
        eq = EUNEW2.equation()
        x = EUNEW2.witness_trace(201)
        rep = verify_riccati_comparison(MajorantPair(eq, eq, 1, 200), x, x)
        assert rep.ok and rep.margin == pytest.approx(0.0, abs=1e-12)

    def test_weaker_minorant_stays_above(self):
        major = CUBIC.equation()
        minor = LinearEq(major.r.scaled(1.5), major.p.scaled(0.5), 1, "weak")
        x = CUBIC.witness_trace(301)
        y = solve_ivp(minor, 1.0, 0.8, 301)
        rep = verify_riccati_comparison(MajorantPair(minor, major, 1, 300), x, y)
        assert rep.ok and rep.margin > 0

    def test_initial_ordering_required(self):
        eq = CUBIC.equation()
        x = CUBIC.witness_trace(50)
        y = solve_ivp(eq, 1.0, 0.4, 50)
        with pytest.raises(PreconditionError):
            verify_riccati_comparison(MajorantPair(eq, eq, 1, 40), x, y)

    def test_violation_is_reported(self):
        # a "majorant" that is not one: the minorant solution oscillates
        minor = eq_from("1", "3")
        major = eq_from("1", "0")
        x = solve_ivp(major, 1.0, 1.0, 30)
        y = solve_ivp(minor, 1.0, 1.0, 30)
        rep = verify_riccati_comparison(MajorantPair(minor, major, 1, 29), x, y)
        assert not rep.ok and rep.violation in ("positivity", "riccati")


class TestTrec:
    def test_reference_pair_euler_under_product(self):
        pair = MajorantPair(euler_reciprocal(1.0), EUNEW2.equation(), 1, 500)
        rep = verify_trec(pair, EUNEW2.witness_trace(501))
        assert rep.ok and rep.monotone and rep.margin >= 0
        assert rep.to_dict()["range"] == [1, 500]

    def test_precomputed_report(self):
        minor = linearized_majorant(sine_cubic_problem(1.0), scaled=True)
        major = euler_reciprocal(0.25)
        x = recessive(major, 1.0, 301).trace
        pre = recessive(minor, 1.0, 301)
        rep = verify_trec(MajorantPair(minor, major, 1, 300), x, report=pre)
        assert rep.ok and rep.recessive is pre

    def test_rejects_non_majorant(self):
        with pytest.raises(PreconditionError):
            verify_trec(MajorantPair(EUNEW2.equation(), euler_reciprocal(1.0), 1, 50),
                        solve_ivp(euler_reciprocal(1.0), 1.0, 0.9, 51))

    def test_range_must_start_at_m(self):
        pair = MajorantPair(euler_reciprocal(1.0), EUNEW2.equation(), 2, 50)
        with pytest.raises(PreconditionError):
            verify_trec(pair, EUNEW2.witness_trace(51))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([EUNEW2, GEOMETRIC, CUBIC]))
    def test_random_pairs(self, seed, fam):
        rng = np.random.default_rng(seed)
        hi = 60
        pair = random_pair(rng, hi + 2, fam)
        rep = verify_trec(MajorantPair(pair.minor, pair.major, 1, hi), fam.witness_trace(hi + 1, pair.lam))
        assert rep.ok and rep.monotone


class TestCertify:
    def test_closed_form_witness(self):
        cert = certify_positive_decreasing(EUNEW2.equation(2.0), 1, 100)
        assert cert.method == "closed-form-witness" and cert.details["witness"] == "eunew2"
        assert cert.claim == "decreasing" and cert.min_value > 0 and cert.max_delta < 0

    def test_constant_witness_when_p_vanishes(self):
        cert = certify_positive_decreasing(eq_from("k", "0"), 1, 20)
        assert cert.details == {"witness": "constant"} and cert.claim == "nonincreasing"

    def test_majorant_transfer(self):
        eq = linearized_majorant(sine_cubic_problem(1.0), scaled=True)
        cert = certify_positive_decreasing(eq, 1, 300)
        assert cert.method == "majorant-transfer"
        assert cert.tail is not None and cert.tail["d"] > 0
        data = json.loads(cert.to_json())
        assert data["range"] == [1, 300] and data["claim"] == "decreasing"

    def test_recessive_numeric(self):
        eq = linearized_majorant(sine_cubic_problem(1.0))
        cert = certify_positive_decreasing(eq, 1, 200, "recessive-numeric")
        assert cert.method == "recessive-numeric" and cert.witness.residual_ok()

    def test_oscillatory_fails(self):
        with pytest.raises(CannotCertifyError):
            certify_positive_decreasing(eq_from("1", "3"), 1, 40)

    def test_bad_arguments(self):
        with pytest.raises(PreconditionError):
            certify_positive_decreasing(EUNEW2.equation(), 1, 10, "bogus")
        with pytest.raises(PreconditionError):
            certify_positive_decreasing(EUNEW2.equation(), 2, 10)
