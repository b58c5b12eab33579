"""Fixed-point solver for ``Δ(a_k Φ(Δx_k)) + b_k F(x_{k+1}) = 0``, ``x_m = c``.

The operator ``T`` maps a candidate ``u`` to the recessive solution,
normalized by ``y_m = c``, of the linear equation

    Δ(a_k J(Δu_k) Δy_k) + b_k F̃(u_{k+1}) y_{k+1} = 0,   F̃(v) = F(v)/v.

A fixed point of ``T`` solves the nonlinear problem.  The iteration starts at
the ceiling ``c prod_{j<k} (1 + M Δz_j/z_j)`` of the invariant set, with ``z``
the recessive solution of the linearized majorant and ``M = 1/sqrt(1+c²)``.
Convergence of the plain iteration is not guaranteed; failure is reported.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from ..decay import ProductBound, product_bound
from ..errors import NoConvergenceError, PreconditionError
from ..linrec import LinearEq, RecessiveReport, SolutionTrace, recessive
from ..seq_core import (
    HalfLineSeq,
    SeqFamily,
    block_tail,
    reciprocal_tails,
    tail_sum_reciprocal,
)
from .model import BVPSpec, CurvatureOperator, FSpec, compute_Lc, linearized_majorant

_phi = CurvatureOperator.phi
_J = CurvatureOperator.J


class TailExtended:
    """Values on ``[m, L]`` continued by ``u_k = u_L T_k / T_L`` for ``k > L``.

    ``T_k = sum_{j>=k} 1/a_j``; the continuation is the recessive shape of the
    equation with ``p ≡ 0``.  Prefix sums beyond ``L`` are cached as they are
    requested.
    """

    def __init__(self, values: np.ndarray, m: int, a: HalfLineSeq):
        self.values = np.asarray(values, dtype=np.float64)
        self.m = m
        self.a = a
        self.L = m + len(self.values) - 1
        self.T_L = tail_sum_reciprocal(a, self.L, horizon=max(64 * self.L, 1 << 20), tol=0.0).value
        self._prefix = np.zeros(1)  # prefix[i] = sum_{j=L}^{L+i-1} 1/a_j

    def _extend_prefix(self, hi: int) -> None:
        have = self.L + len(self._prefix) - 1
        if hi <= have:
            return
        top = max(hi, have + (have - self.m + 1))
        with np.errstate(over="ignore", divide="ignore"):
            inv = 1.0 / self.a.values(have, top - 1, check_finite=False)
        inv[~np.isfinite(inv)] = 0.0
        self._prefix = np.concatenate([self._prefix, self._prefix[-1] + np.cumsum(inv)])

    def __call__(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        out = np.empty(ks.shape)
        inside = ks <= self.L
        out[inside] = self.values[ks[inside] - self.m]
        if not inside.all():
            far = ks[~inside]
            self._extend_prefix(int(far.max()))
            ratio = 1.0 - self._prefix[far - self.L] / self.T_L
            out[~inside] = self.values[-1] * np.maximum(ratio, 0.0)
        return out

    def seq(self, name: str = "u") -> HalfLineSeq:
        return HalfLineSeq(self, self.m, name=name)


def linearization(spec: BVPSpec, u: HalfLineSeq, name: str = "T(u)") -> LinearEq:
    """The linear equation with ``r = a J(Δu)`` and ``p = b F̃(u_{k+1})``."""
    a, b, F = spec.a, spec.b, spec.F

    def r_fn(ks: np.ndarray) -> np.ndarray:
        lo, hi = int(ks[0]), int(ks[-1])
        uv = u.values(lo, hi + 1, check_finite=False)
        return a.values(lo, hi, check_finite=False) * _J(np.diff(uv))

    def p_fn(ks: np.ndarray) -> np.ndarray:
        lo, hi = int(ks[0]), int(ks[-1])
        return b.values(lo, hi, check_finite=False) * F.ratio(u.values(lo + 1, hi + 1, check_finite=False))

    return LinearEq(HalfLineSeq(r_fn, spec.m, "r[u]"), HalfLineSeq(p_fn, spec.m, "p[u]"), spec.m, name)


@dataclass
class IterationRecord:
    """One application of the operator.

    ``change`` is ``sup_{[m,K]} |u_new - u_old|``; ``omega_margin`` is the
    smallest ``1 - u_k / bound_k`` for ``k > m``; ``sandwich_ok`` records that the
    linearized majorant dominates the iterate's equation on ``[m, K]``.
    """

    iteration: int
    change: float
    horizon: int
    stabilization: float
    omega_ok: bool
    omega_margin: float
    sandwich_ok: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "change": self.change,
            "horizon": self.horizon,
            "stabilization": self.stabilization,
            "omega_ok": self.omega_ok,
            "omega_margin": self.omega_margin,
            "sandwich_ok": self.sandwich_ok,
        }


@dataclass
class BVPSolution:
    """A (numerically) converged solution on ``[m, K]``.

    ``values[i]`` is ``x_{m+i}``.  ``omega_bound`` holds the invariant-set
    ceiling on the same range (``None`` for the ``b ≡ 0`` shortcut, where
    the ceiling is not needed).
    """

    spec: BVPSpec
    values: np.ndarray
    K: int
    converged: bool
    log: list[IterationRecord]
    fp_tol: float
    Lc: float
    omega_bound: np.ndarray | None = None
    linear: RecessiveReport | None = field(default=None, repr=False)
    tail_constant: float | None = None
    method: str = "fixed-point"

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def horizon(self) -> int:
        return self.K

    @property
    def iterations(self) -> int:
        return len(self.log)

    def __call__(self, k: int) -> float:
        return float(self.values[k - self.m])

    @property
    def delta(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def phi_quasidiff(self) -> np.ndarray:
        """``a_k Φ(Δx_k)`` on ``[m, K-1]``."""
        return self.spec.a.values(self.m, self.K - 1) * _phi(self.delta)

    def residual(self) -> np.ndarray:
        return nonlinear_residual(self.spec, self).values(self.m, self.K - 2)

    def max_relative_residual(self) -> float:
        res = self.residual()
        scale = residual_scale(self.spec, self.values, self.m)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(scale > 0, np.abs(res) / scale, np.abs(res))
        return float(np.max(rel)) if rel.size else 0.0

    @property
    def omega_ok(self) -> bool:
        if self.omega_bound is None:
            return True
        return bool(np.all(self.values >= 0) and np.all(self.values <= self.omega_bound * (1 + 1e-9)))

    def to_csv(self) -> str:
        """Columns ``k, x_k, delta_x_k, phi_quasidiff_k, residual_k, omega_bound_k``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "x_k", "delta_x_k", "phi_quasidiff_k", "residual_k", "omega_bound_k"])
        dx, q, res = self.delta, self.phi_quasidiff, self.residual()
        n = len(self.values)
        for i in range(n):
            w.writerow([
                self.m + i,
                repr(float(self.values[i])),
                repr(float(dx[i])) if i < n - 1 else "",
                repr(float(q[i])) if i < n - 1 else "",
                repr(float(res[i])) if i < n - 2 else "",
                repr(float(self.omega_bound[i])) if self.omega_bound is not None else "",
            ])
        return buf.getvalue()

    def log_dict(self) -> dict[str, Any]:
        return {
            "fingerprint": self.spec.fingerprint(),
            "method": self.method,
            "converged": self.converged,
            "iterations": [r.to_dict() for r in self.log],
            "fp_tol": self.fp_tol,
            "K": self.K,
            "L_c": self.Lc,
            "M": self.spec.M,
            "max_relative_residual": self.max_relative_residual(),
            "omega_ok": self.omega_ok,
            "tail_constant": self.tail_constant,
        }

    def log_json(self) -> str:
        return json.dumps(self.log_dict(), indent=2, sort_keys=True)


def residual_scale(spec: BVPSpec, x: np.ndarray, m: int) -> np.ndarray:
    """``|a_k Φ(Δx_k)| + |a_{k+1} Φ(Δx_{k+1})| + |b_k F(x_{k+1})|`` on ``[m, K-2]``."""
    x = np.asarray(x, dtype=np.float64)
    K = m + len(x) - 1
    q = spec.a.values(m, K - 1) * _phi(np.diff(x))
    f = spec.b.values(m, K - 2) * spec.F(x[1:-1])
    return np.abs(q[:-1]) + np.abs(q[1:]) + np.abs(f)


def nonlinear_residual(spec: BVPSpec, x: SolutionTrace | BVPSolution | np.ndarray) -> HalfLineSeq:
    """``Δ(a_k Φ(Δx_k)) + b_k F(x_{k+1})`` on ``[m, K-2]`` for ``x`` given on ``[m, K]``."""
    vals = np.asarray(x if isinstance(x, np.ndarray) else x.values, dtype=np.float64)
    m = spec.m
    K = m + len(vals) - 1
    if K - 2 < m:
        raise PreconditionError("need at least three values")
    q = spec.a.values(m, K - 1) * _phi(np.diff(vals))
    res = np.diff(q) + spec.b.values(m, K - 2) * spec.F(vals[1:-1])
    return HalfLineSeq.from_array(res, m, name="residual")


def omega_ceiling(spec: BVPSpec, K: int, rec_tol: float = 1e-11,
                  Lc: float | None = None) -> tuple[ProductBound, RecessiveReport]:
    """The ceiling ``c prod (1 + M Δz/z)`` on the long range of the majorant's recessive ``z``."""
    eq = linearized_majorant(spec, Lc=Lc)
    rep = recessive(eq, 1.0, K, rec_tol)
    z = HalfLineSeq.from_array(rep.long_values, spec.m, name="z")
    top = spec.m + len(rep.long_values) - 1
    return product_bound(spec.c, spec.M, z, top), rep


def apply_operator(spec: BVPSpec, u: TailExtended, K: int, rec_tol: float = 1e-11,
                   **recessive_options: Any) -> RecessiveReport:
    """``T(u)``: the recessive solution of the linearization, normalized by ``y_m = c``."""
    return recessive(linearization(spec, u.seq()), spec.c, K, rec_tol, **recessive_options)


def _vanishing_b_solution(spec: BVPSpec, K: int) -> np.ndarray:
    """Exact solution for ``b ≡ 0``: ``a_k Φ(Δx_k) = Q`` with ``x_k -> 0``.

    ``Q`` solves ``c + sum_j Φ^{-1}(Q/a_j) = 0``; the tail beyond a far index
    ``H`` is linear in ``Q`` to relative order ``(Q/a_H)²``.
    """
    m, c = spec.m, spec.c
    H = max(64 * K, 1 << 16)
    a = spec.a.values(m, H, check_finite=False)
    a = np.where(np.isfinite(a), a, np.inf)
    tail = tail_sum_reciprocal(spec.a, H + 1, horizon=64 * H, tol=0.0).value
    a_min = float(np.min(a))

    def steps(Q: float) -> np.ndarray:
        return CurvatureOperator.inverse_phi(Q / a)

    def g(Q: float) -> float:
        return c + math.fsum(steps(Q)) + Q * tail

    lo = -a_min * (1.0 - 1e-15)
    while g(lo) > 0:
        lo = -a_min + (lo + a_min) * 1e-3
        if lo + a_min <= 0:
            raise PreconditionError("no decreasing solution tends to zero")
    Q = brentq(g, lo, 0.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    s = -steps(Q)
    x = np.cumsum(s[::-1])[::-1] - Q * tail
    return x[: K - m + 1] * (c / x[0])


def fixed_point_solve(
    spec: BVPSpec,
    K: int = 400,
    fp_tol: float = 1e-10,
    max_iter: int = 50,
    *,
    rec_tol: float | None = None,
    precision: str = "double",
    u0: np.ndarray | None = None,
) -> BVPSolution:
    """Iterate ``u <- T(u)`` from the invariant-set ceiling until ``sup |Δu| <= fp_tol``.

    Args:
        spec: The problem.
        K: Last index of the reported solution.
        fp_tol: Sup-norm tolerance between successive iterates on ``[m, K]``.
        max_iter: Iteration cap.
        rec_tol: Stabilization tolerance of each recessive solve; defaults to
            ``min(1e-11, fp_tol / 10)``.
        precision: ``double`` or ``extended`` for the recessive solves.
        u0: Optional starting values on ``[m, L]`` with ``L >= K`` instead of
            the ceiling.

    Raises:
        NoConvergenceError: after ``max_iter`` iterations; carries the log.
        PreconditionError: for ``K <= m + 1``.
    """
    m, c = spec.m, spec.c
    if K <= m + 1:
        raise PreconditionError(f"need K > m + 1, got K={K}")
    rec_tol = min(1e-11, fp_tol / 10) if rec_tol is None else rec_tol
    n = K - m + 1

    if spec.b_vanishes(max(64 * K, 1 << 16)):
        x = _vanishing_b_solution(spec, K)
        rec = IterationRecord(1, 0.0, max(64 * K, 1 << 16), 0.0, True, 0.0, True)
        return BVPSolution(spec, x, K, True, [rec], fp_tol, compute_Lc(spec.F, c),
                           method="vanishing-b")

    Lc = compute_Lc(spec.F, c)
    ceiling, _ = omega_ceiling(spec, K, rec_tol, Lc)
    bound = ceiling.values
    s = math.sqrt(1.0 + c * c)
    a_win = spec.a.values(m, K)
    b_win = spec.b.values(m, K)
    u = bound.copy() if u0 is None else np.asarray(u0, dtype=np.float64)
    log: list[IterationRecord] = []
    report: RecessiveReport | None = None
    for it in range(1, max_iter + 1):
        ext = TailExtended(u, m, spec.a)
        eq = linearization(spec, ext.seq(), f"T(u{it - 1})")
        r_k = eq.r.values(m, K)
        p_k = eq.p.values(m, K)
        sandwich = bool(np.all(r_k >= a_win / s * (1 - 1e-12)) and np.all(p_k <= Lc * b_win * (1 + 1e-12)))
        report = recessive(eq, c, K, rec_tol, precision=precision)
        new = report.long_values
        change = float(np.max(np.abs(new[:n] - u[:n])))
        ratio = new[:n] / bound[:n]
        omega_ok = bool(np.all(new[:n] >= 0) and np.all(ratio <= 1 + 1e-9))
        margin = float(1.0 - np.max(ratio[1:]))  # x_m = c = bound_m always
        log.append(IterationRecord(it, change, report.horizons_used[-1], report.stabilization_error,
                                   omega_ok, margin, sandwich))
        u = new
        if change <= fp_tol:
            sol = BVPSolution(spec, u[:n].copy(), K, True, log, fp_tol, Lc, bound[:n].copy(), report)
            sol.tail_constant = _tail_constant(spec, u, K)
            return sol
    raise NoConvergenceError(
        f"no convergence to {fp_tol:g} in {max_iter} iterations (last change {log[-1].change:.3g})",
        [r.to_dict() for r in log],
    )


def _tail_constant(spec: BVPSpec, u: np.ndarray, K: int) -> float | None:
    """``lim x_k / sum_{j>=k} 1/a_j`` when the ratio has plateaued on ``[K/4, K]``."""
    m = spec.m
    tails = reciprocal_tails(spec.a, m, K)
    idx = sorted({max(m, K // 4), max(m, K // 2), K})
    ratios = [u[k - m] / tails[k - m] for k in idx]
    d = ratios[-1]
    if not (math.isfinite(d) and d > 0) or max(ratios) - min(ratios) > 0.05 * d:
        return None
    return float(d)


# -- membership in the solution set ------------------------------------------------


@dataclass
class MembershipReport:
    """Checks that ``x`` behaves like an element of the solution set.

    ``N`` is ``max x_k / T_k`` with ``T_k = sum_{j>=k} 1/a_j``; ``lower_bound``
    is ``(1/N²)(1/T_k - 1/T_m)``, a lower bound for the partial sums
    ``S_k = sum_{j=m}^{k-1} 1/(a_j x_j x_{j+1})`` that grows without bound.
    ``divergence`` is ``evidenced`` when the sums stay above it and their
    doubled-block increments do not decay geometrically.
    """

    boundary_ok: bool
    positive: bool
    nonincreasing: bool
    N: float
    partial_sums: np.ndarray = field(repr=False)
    lower_bound: np.ndarray = field(repr=False)
    above_bound: bool
    divergence: str

    @property
    def ok(self) -> bool:
        return (self.boundary_ok and self.positive and self.nonincreasing
                and self.divergence == "evidenced")

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "boundary_ok": self.boundary_ok,
            "positive": self.positive,
            "nonincreasing": self.nonincreasing,
            "N": self.N,
            "above_bound": self.above_bound,
            "divergence": self.divergence,
            "final_partial_sum": float(self.partial_sums[-1]),
        }


def verify_S_membership(spec: BVPSpec, x: SolutionTrace | BVPSolution | np.ndarray,
                        rtol: float = 1e-12) -> MembershipReport:
    """Boundary value, positivity, monotonicity and divergence of ``sum 1/(a x x)``."""
    vals = np.asarray(x if isinstance(x, np.ndarray) else x.values, dtype=np.float64)
    m = spec.m
    K = m + len(vals) - 1
    boundary_ok = bool(abs(vals[0] - spec.c) <= rtol * spec.c)
    positive = bool(np.all(vals > 0))
    nonincreasing = bool(np.all(np.diff(vals) <= 0))
    if not positive:
        empty = np.empty(0)
        return MembershipReport(boundary_ok, False, nonincreasing, math.nan, empty, empty,
                                False, "not evidenced")
    a = spec.a.values(m, K - 1)
    tails = reciprocal_tails(spec.a, m, K)
    N = float(np.max(vals / tails))
    sums = np.concatenate([[0.0], np.cumsum(1.0 / (a * vals[:-1] * vals[1:]))])
    lower = (1.0 / tails - 1.0 / tails[0]) / (N * N)
    above = bool(np.all(sums >= lower * (1 - 1e-12)))
    blocks = []
    lo = m
    length = max(4, (K - m + 1) // 8)
    while lo + length <= K:
        blocks.append(sums[lo + length - m] - sums[lo - m])
        lo += length
        length *= 2
    _, _, geometric = block_tail(blocks) if len(blocks) >= 2 else (0.0, 0.0, True)
    evidenced = above and not geometric and len(blocks) >= 2
    return MembershipReport(boundary_ok, positive, nonincreasing, N, sums, lower, above,
                            "evidenced" if evidenced else "not evidenced")


# -- manufactured problem --------------------------------------------------------


def manufactured_b_expression(c: float = 1.0) -> str:
    """``b_k = (3/4) c² 2^{-k} / (s_k t_k (s_k + t_k))`` as a coefficient expression.

    Here ``s_k = sqrt(1 + c² 4^{-k-1})`` and ``t_k = sqrt(1 + c² 4^{-k})``; this
    is ``-Δ(a_k Φ(Δx*_k)) / x*_{k+1}`` without cancellation.
    """
    c2 = repr(float(c * c))
    s = f"sqrt(1+{c2}*4**(-k-1))"
    t = f"sqrt(1+{c2}*4**(-k))"
    return f"0.75*{c2}*2**(-k)/({s}*{t}*({s}+{t}))"


def manufactured_problem(c: float = 1.0) -> tuple[BVPSpec, np.ndarray]:
    """A problem with exact solution ``x*_k = c 2^{1-k}`` on ``k >= 1``.

    ``a_k = 2^k``, ``F(u) = u`` and ``b`` from :func:`manufactured_b_expression`.

    Returns:
        The problem and ``x*`` on ``[1, 1024]``.
    """
    spec = BVPSpec.from_families(SeqFamily.exponential(2.0), SeqFamily.custom(manufactured_b_expression(c)),
                                 FSpec.linear(), 1, c, "manufactured")
    xs = c * np.exp2(1.0 - np.arange(1, 1025, dtype=np.float64))
    return spec, xs
