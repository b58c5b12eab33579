from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvbvp.bvp import euler_product, euler_reciprocal, library_majorants
from curvbvp.bvp.library import CUBIC, EUNEW2, GEOMETRIC, euler_product_residuals
from curvbvp.seq_core import SeqFamily, make_seq


def test_euler_product_values():
    assert euler_product(1) == 1
    assert euler_product(3) == Fraction(15, 8)
    with pytest.raises(ValueError):
        euler_product(0)


def test_euler_product_identity_exact():
    assert all(r == 0 for r in euler_product_residuals(60))


@pytest.mark.parametrize("fam", library_majorants(), ids=lambda f: f.name)
def test_witness_exact_and_monotone(fam):
    assert fam.validate(100 if fam is not EUNEW2 else 50)
    assert all(r == 0 for r in fam.exact_residuals(40))


@pytest.mark.parametrize("fam", library_majorants(), ids=lambda f: f.name)
def test_float_families_match_rationals(fam):
    K = 60
    r = make_seq(fam.r_family, 1).values(1, K)
    p = make_seq(fam.p_family, 1).values(1, K)
    x = fam.witness_seq().values(1, K)
    ks = range(1, K + 1)
    np.testing.assert_allclose(r, [float(fam.r_exact(k)) for k in ks], rtol=1e-14)
    np.testing.assert_allclose(p, [float(fam.p_exact(k)) for k in ks], rtol=1e-14)
    np.testing.assert_allclose(x, [float(fam.witness_exact(k)) for k in ks], rtol=1e-13)


@given(st.floats(0.01, 100.0))
def test_scaling_preserves_witness(lam):
    tr = CUBIC.witness_trace(80, lam)
    assert tr.max_relative_residual() <= 1e-13


def test_scale_interval():
    eq = CUBIC.equation(2.0)
    lo, hi = CUBIC.scale_interval(eq, 1, 500)
    assert lo == pytest.approx(2.0) and hi == pytest.approx(2.0)
    lo, hi = GEOMETRIC.scale_interval(euler_reciprocal(0.25), 1, 50)
    assert lo > hi


def test_euler_reciprocal_form():
    eq = euler_reciprocal(0.25)
    assert eq.name == "EuR" and eq.r(1) == 4.0 and eq.p(7) == 0.25
    assert euler_reciprocal(1.0).r(2) == 36.0


def test_product_family_far_out_matches_difference():
    s = make_seq(SeqFamily("product_closed_form", {"difference": 1}), 1)
    y = make_seq(SeqFamily("product_closed_form", {}), 1)
    for k in (10, 300, 3000):
        assert s(k) == pytest.approx(y(k + 1) - y(k), rel=1e-10)
