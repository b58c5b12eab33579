import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvbvp.bvp import (
    BVPSpec,
    FSpec,
    TailExtended,
    fixed_point_solve,
    linearization,
    manufactured_problem,
    nonlinear_residual,
    omega_ceiling,
    sine_cubic_problem,
    verify_S_membership,
)
from curvbvp.errors import NoConvergenceError, PreconditionError
from curvbvp.seq_core import SeqFamily, make_seq


@pytest.fixture(scope="module")
def sine_cubic_solution():
    return fixed_point_solve(sine_cubic_problem(1.0), K=400)


class TestSineCubic:
    def test_against_oracle(self, sine_cubic_solution, sine_cubic_oracle):
        oracle = np.array([float(v) for v in sine_cubic_oracle["x"]])
        np.testing.assert_allclose(sine_cubic_solution.values, oracle, rtol=1e-10, atol=1e-12)

    def test_frozen_values(self, sine_cubic_solution):
        sol = sine_cubic_solution
        assert [sol(1), sol(10), sol(100), sol(400)] == pytest.approx(
            [1.0, 0.1446241, 0.01512128, 0.00379451], rel=1e-6)

    def test_structure(self, sine_cubic_solution):
        sol = sine_cubic_solution
        assert sol.converged and sol.iterations <= 50 and sol.omega_ok
        assert np.all(sol.delta < 0) and sol.max_relative_residual() < 1e-10
        assert all(r.sandwich_ok and r.omega_ok for r in sol.log)
        changes = [r.change for r in sol.log]
        assert changes[-1] <= 1e-10 and changes[-1] < changes[0]
        assert sol.tail_constant == pytest.approx(1.5197, rel=1e-3)

    def test_membership(self, sine_cubic_solution):
        rep = verify_S_membership(sine_cubic_problem(1.0), sine_cubic_solution)
        assert rep.ok and rep.above_bound and rep.to_dict()["divergence"] == "evidenced"

    def test_csv_and_log(self, sine_cubic_solution):
        sol = sine_cubic_solution
        lines = sol.to_csv().splitlines()
        assert lines[0] == "k,x_k,delta_x_k,phi_quasidiff_k,residual_k,omega_bound_k"
        assert len(lines) == 401 and lines[1].startswith("1,1.0,")
        log = json.loads(sol.log_json())
        assert log["converged"] and len(log["iterations"]) == sol.iterations

    def test_no_convergence_carries_log(self):
        with pytest.raises(NoConvergenceError) as info:
            fixed_point_solve(sine_cubic_problem(1.0), K=100, max_iter=2)
        assert len(info.value.log) == 2 and info.value.log[0]["iteration"] == 1

    def test_smaller_c_converges_faster(self):
        a = fixed_point_solve(sine_cubic_problem(0.25), K=100)
        b = fixed_point_solve(sine_cubic_problem(1.0), K=100)
        assert a.iterations <= b.iterations and a(1) == 0.25

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            fixed_point_solve(sine_cubic_problem(1.0), K=2)


class TestManufactured:
    def test_recovery(self):
        spec, exact = manufactured_problem(1.0)
        sol = fixed_point_solve(spec, K=200)
        assert np.max(np.abs(sol.values - exact[:200])) <= 1e-9

    def test_exact_solution_has_zero_residual(self):
        spec, exact = manufactured_problem(1.0)
        res = nonlinear_residual(spec, exact[:60]).values(1, 58)
        assert np.max(np.abs(res)) <= 1e-15

    @settings(max_examples=4, deadline=None)
    @given(st.floats(0.2, 1.5))
    def test_recovery_across_c(self, c):
        spec, exact = manufactured_problem(c)
        sol = fixed_point_solve(spec, K=80)
        assert np.max(np.abs(sol.values - exact[:80])) <= 1e-9 * max(1.0, c)


def test_vanishing_b_against_mpmath():
    c = 2.0
    spec = BVPSpec.from_families(SeqFamily.power(2.0, 1.0), SeqFamily.constant(0.0), FSpec.power(3.0), 1, c)
    sol = fixed_point_solve(spec, K=50)
    assert sol.method == "vanishing-b"
    mpmath.mp.dps = 30

    def step(Q, j):
        w = Q / (j + 1) ** 2
        return w / mpmath.sqrt(1 - w * w)

    Q = mpmath.findroot(lambda Q: c + mpmath.nsum(lambda j: step(Q, j), [1, mpmath.inf]), -1.0)
    ref = [mpmath.mpf(c)]
    for j in range(1, 50):
        ref.append(ref[-1] + step(Q, j))
    np.testing.assert_allclose(sol.values, [float(v) for v in ref], rtol=1e-11)
    q = sol.phi_quasidiff
    np.testing.assert_allclose(q, q[0], rtol=1e-12)


def test_tail_extension_model():
    a = make_seq(SeqFamily.power(2.0, 1.0), 1)
    ext = TailExtended(np.array([1.0, 0.5, 0.25]), 1, a)
    ks = np.array([1, 3, 4, 100])
    vals = ext(ks)
    T3 = float(mpmath.psi(1, 4))
    assert vals[:2].tolist() == [1.0, 0.25]
    assert vals[2] == pytest.approx(0.25 * (T3 - 1 / 16) / T3, rel=1e-9)
    assert vals[3] == pytest.approx(0.25 * float(mpmath.psi(1, 101)) / T3, rel=1e-6)


def test_linearization_coefficients():
    spec = sine_cubic_problem(1.0)
    u = make_seq(SeqFamily.power(-1.0), 1)
    eq = linearization(spec, u)
    k = 5
    du = 1 / 6 - 1 / 5
    assert eq.r(k) == pytest.approx(spec.a(k) / math.sqrt(1 + du * du), rel=1e-14)
    assert eq.p(k) == pytest.approx(spec.b(k) / 36, rel=1e-14)


def test_omega_ceiling_starts_at_c_and_decreases():
    spec = sine_cubic_problem(0.5)
    bound, rep = omega_ceiling(spec, 100)
    v = bound.values
    assert v[0] == pytest.approx(0.5) and np.all(np.diff(v) < 0)
    assert len(v) == len(rep.long_values)


def test_membership_rejects_bad_sequences():
    spec = sine_cubic_problem(1.0)
    assert not verify_S_membership(spec, np.array([1.0, -0.5, 0.2]))
    rep = verify_S_membership(spec, np.full(200, 1.0))
    assert rep.positive and not rep.ok


@pytest.mark.parametrize("shape", ["harmonic", "sqrt"])
def test_other_starts_reach_the_same_fixed_point(sine_cubic_solution, shape):
    k = np.arange(1, 401, dtype=np.float64)
    u0 = 1.0 / k if shape == "harmonic" else k**-0.5
    other = fixed_point_solve(sine_cubic_problem(1.0), K=400, u0=u0)
    assert np.max(np.abs(other.values - sine_cubic_solution.values)) <= 1e-10
