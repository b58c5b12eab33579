"""Linear self-adjoint recurrences ``Δ(r_k Δy_k) + p_k y_{k+1} = 0``.

Forward solutions, generalized zeros, Riccati ratios, recessive solutions by
backward recurrence with horizon doubling, and the tail constant
``d = lim u_k / sum_{j>=k} 1/r_j``.
"""

from __future__ import annotations

import contextlib
import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Any

import mpmath
import numpy as np

from . import _kernels
from .errors import (
    DomainError,
    HypothesisViolatedError,
    NonPositiveCoefficientError,
    NoStabilizationError,
    OscillationError,
    OverflowFlag,
    PreconditionError,
    UnstableFitError,
)
from .seq_core import (
    EXTENDED_PREC,
    HalfLineSeq,
    block_tail,
    doubling_blocks,
    power_fit,
    power_tail_reciprocal,
    reciprocal_tails,
    tail_sum_reciprocal,
)

#: Relative factor of the neighbouring magnitudes used as the zero threshold in sign tests.
ZETA = 1e-13


@dataclass(frozen=True)
class LinearEq:
    """The equation ``Δ(r_k Δy_k) + p_k y_{k+1} = 0`` on ``k >= m``."""

    r: HalfLineSeq
    p: HalfLineSeq
    m: int
    name: str = "L"

    def coefficients(self, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrays ``r`` and ``p`` on ``[lo, hi]`` with sign checks."""
        r = self.r.values(lo, hi)
        p = self.p.values(lo, hi)
        if np.any(r <= 0):
            bad = lo + int(np.argmax(r <= 0))
            raise NonPositiveCoefficientError(f"{self.name}: r_k <= 0 at k={bad}")
        if np.any(p < 0):
            bad = lo + int(np.argmax(p < 0))
            raise DomainError(f"{self.name}: p_k < 0 at k={bad}")
        return r, p

    def mp_coefficients(self, lo: int, hi: int) -> tuple[list, list]:
        return self.r.mp_values(lo, hi), self.p.mp_values(lo, hi)

    def scaled(self, factor: float, name: str | None = None) -> LinearEq:
        """Same solutions, both coefficients multiplied by ``factor > 0``."""
        if factor <= 0:
            raise PreconditionError("scale factor must be positive")
        return LinearEq(self.r.scaled(factor), self.p.scaled(factor), self.m,
                        name or f"{factor:g}*{self.name}")

    def fingerprint(self, n: int = 16) -> str:
        """Short hash of the name and the first ``n`` coefficient pairs."""
        r = self.r.values(self.m, self.m + n - 1, check_finite=False)
        p = self.p.values(self.m, self.m + n - 1, check_finite=False)
        h = hashlib.sha256()
        h.update(f"{self.name}|{self.m}|".encode())
        h.update(np.ascontiguousarray(r).tobytes())
        h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()[:16]


@dataclass
class SolutionTrace:
    """A solution sampled on ``[m, K]``.

    ``values[i]`` is ``y_{m+i}``; ``quasi_differences[i]`` is ``r_k Δy_k`` for
    ``k = m+i`` on ``[m, K-1]``.  ``mp_values`` holds the extended-precision
    values when the trace was produced in that mode.
    """

    eq: LinearEq
    values: np.ndarray
    horizon: int
    tail_constant: float | None = None
    mp_values: list | None = None
    rtol: float = 1e-12

    @property
    def m(self) -> int:
        return self.eq.m

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.m, self.horizon + 1)

    def __call__(self, k: int) -> float:
        return float(self.values[k - self.m])

    @property
    def delta(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def quasi_differences(self) -> np.ndarray:
        r = self.eq.r.values(self.m, self.horizon - 1)
        return r * self.delta

    def residuals(self) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise residual and local scale on ``[m, K-2]``."""
        q = self.quasi_differences
        p = self.eq.p.values(self.m, self.horizon - 2)
        py = p * self.values[1:-1]
        res = np.diff(q) + py
        scale = np.abs(q[:-1]) + np.abs(q[1:]) + np.abs(py)
        return res, scale

    def max_relative_residual(self) -> float:
        res, scale = self.residuals()
        if res.size == 0:
            return 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(scale > 0, np.abs(res) / scale, np.abs(res))
        return float(np.max(rel))

    def residual_ok(self) -> bool:
        return self.max_relative_residual() <= self.rtol

    def to_csv(self) -> str:
        """CSV with columns k, y_k, delta_y_k, quasi_diff_k, residual_k."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "y_k", "delta_y_k", "quasi_diff_k", "residual_k"])
        dy = self.delta
        q = self.quasi_differences
        res, _ = self.residuals()
        n = len(self.values)
        for i in range(n):
            w.writerow([
                self.m + i,
                repr(float(self.values[i])),
                repr(float(dy[i])) if i < n - 1 else "",
                repr(float(q[i])) if i < n - 1 else "",
                repr(float(res[i])) if i < n - 2 else "",
            ])
        return buf.getvalue()


@dataclass
class RecessiveReport:
    """Outcome of :func:`recessive`.

    ``divergence_partial_sums[i]`` is ``sum_{j=m}^{m+i} 1/(r_j u_j u_{j+1})``.
    ``long_values`` keeps the normalized solution on the final working
    horizon, beyond the reporting window.
    """

    trace: SolutionTrace
    horizons_used: list[int]
    stabilization_error: float
    divergence_partial_sums: np.ndarray
    terminal: str
    long_values: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    changes: list[float] = field(default_factory=list)


# -- forward solutions -------------------------------------------------------


def solve_ivp(eq: LinearEq, y_m: float, y_m1: float, K: int,
              precision: str = "double") -> SolutionTrace:
    """Forward solution with ``y_m``, ``y_{m+1}`` given, sampled on ``[m, K]``.

    Raises:
        PreconditionError: if ``K <= m + 1``.
        OverflowFlag: if the solution leaves the floating-point range.
    """
    m = eq.m
    if K <= m + 1:
        raise PreconditionError(f"need K > m + 1, got K={K}, m={m}")
    n = K - m + 1
    if precision == "extended":
        with mpmath.workprec(EXTENDED_PREC):
            r, p = eq.mp_coefficients(m, K)
            ys = _kernels.forward_mp(r, p, mpmath.mpf(y_m), mpmath.mpf(y_m1), n)
        vals = np.array([float(v) for v in ys])
        trace = SolutionTrace(eq, vals, K, mp_values=ys)
    else:
        r, p = eq.coefficients(m, K)
        with np.errstate(all="ignore"):
            vals = _kernels.forward(r, p, float(y_m), float(y_m1), n)
        trace = SolutionTrace(eq, vals, K)
    if not np.all(np.isfinite(trace.values)):
        bad = m + int(np.argmin(np.isfinite(trace.values)))
        raise OverflowFlag(f"{eq.name}: forward solution overflowed at k={bad}")
    return trace


def generalized_zeros(trace: SolutionTrace, zeta: float = ZETA) -> list[int]:
    """Indices ``n`` in ``(m, K]`` with ``y_n = 0`` or ``y_{n-1} y_n < 0``.

    A value counts as zero when its magnitude is at most ``zeta`` times the
    largest neighbouring magnitude ``max(|y_{n-1}|, |y_{n+1}|)``, so that
    rapidly decaying solutions are not mistaken for vanishing ones.
    """
    return generalized_zeros_array(trace.values, trace.m, zeta)


def generalized_zeros_array(values: np.ndarray, m: int, zeta: float = ZETA) -> list[int]:
    y = np.asarray(values, dtype=np.float64)
    if y.size < 2:
        return []
    a = np.abs(y)
    local = a.copy()
    local[1:] = np.maximum(local[1:], a[:-1])
    local[:-1] = np.maximum(local[:-1], a[1:])
    is_zero = a <= zeta * local
    sign_change = y[:-1] * y[1:] < 0
    hits = is_zero[1:] | (sign_change & ~is_zero[:-1])
    return [m + 1 + int(i) for i in np.nonzero(hits)[0]]


def riccati(trace: SolutionTrace) -> HalfLineSeq:
    """The Riccati ratio ``w_k = r_k Δy_k / y_k`` on ``[m, K-1]``.

    Raises:
        DomainError: at a vanishing value.
    """
    y = trace.values[:-1]
    if np.any(y == 0):
        bad = trace.m + int(np.argmax(y == 0))
        raise DomainError(f"riccati: y vanishes at k={bad}")
    return HalfLineSeq.from_array(trace.quasi_differences / y, trace.m, name=f"w[{trace.eq.name}]")


def riccati_array(eq: LinearEq, values: np.ndarray) -> np.ndarray:
    y = np.asarray(values)
    r = eq.r.values(eq.m, eq.m + len(y) - 2)
    return r * np.diff(y) / y[:-1]


# -- recessive solutions -----------------------------------------------------


def _log_window_means(eq: LinearEq, lo: int, hi: int) -> tuple[float, float]:
    r = eq.r.values(lo, hi - 1)
    k = np.arange(lo, hi, dtype=np.float64)
    return float(np.mean(np.log(r))), float(np.mean(np.log(k)))


def terminal_ratio(eq: LinearEq, N: int, mode: str = "auto") -> tuple[float, str]:
    """Guess ``u_{N+1}/u_N`` for the recessive solution; see :func:`terminal_decrement`."""
    g, label = terminal_decrement(eq, N, mode)
    return 1.0 - g, label


def terminal_decrement(eq: LinearEq, N: int, mode: str = "auto") -> tuple[float, str]:
    """Guess ``1 - u_{N+1}/u_N`` for the recessive solution.

    ``zero`` gives the classical terminal data ``(1, 0)``.  ``tail`` uses the
    reciprocal tail sum ``T_k = sum_{j>=k} 1/r_j`` (the ``p = 0`` recessive).
    ``auto`` additionally detects locally power-like coefficients
    ``r ~ k^alpha``, ``p ~ Q r / k^2`` and uses the decay exponent of the
    corresponding Euler equation, which matters when ``p`` is not negligible
    against ``r / k^2``.
    """
    if mode == "zero":
        return 1.0, "zero"
    if mode not in ("auto", "tail"):
        raise PreconditionError(f"unknown terminal mode {mode!r}")

    power_like = False
    alpha = math.nan
    q_ratio = 0.0
    lo = max(eq.m, 1, N // 4)
    if mode == "auto" and N // 2 > lo + 4:
        try:
            l1, k1 = _log_window_means(eq, lo, N // 2)
            l2, k2 = _log_window_means(eq, N // 2, N)
            l3, k3 = _log_window_means(eq, N, 2 * N)
            a_in = (l2 - l1) / (k2 - k1)
            a_out = (l3 - l2) / (k3 - k2)
            if abs(a_in - a_out) <= 0.05 * max(1.0, abs(a_out)) and abs(a_out) < 20:
                power_like = True
                alpha, shift = power_fit(eq.r, 2 * N)
                if not abs(alpha - a_out) <= 0.05 * max(1.0, abs(a_out)):
                    alpha, shift = a_out, 0.0
                ks = np.arange(N // 2, 2 * N, dtype=np.float64) + shift
                rr = eq.r.values(N // 2, 2 * N - 1)
                pp = eq.p.values(N // 2, 2 * N - 1)
                qk = pp * ks * ks / rr
                half = N - N // 2
                q_in, q_out = float(np.mean(qk[:half])), float(np.mean(qk[half:]))
                # p k^2 / r decaying: p is asymptotically negligible, keep the tail-sum ratio
                if q_out > 0.75 * q_in and q_out > 1e-12:
                    q_ratio = q_out
        except DomainError:
            power_like = False

    exponent = 1.0
    if power_like and q_ratio > 0.0:
        disc = (alpha - 1.0) ** 2 - 4.0 * q_ratio
        # critical (double-root) equations sit at disc = 0 up to fitting noise
        if abs(disc) <= 1e-6 * max(1.0, (alpha - 1.0) ** 2):
            disc = 0.0
        if disc < -1e-2:
            return 1.0, "zero"
        sigma = 0.5 * ((alpha - 1.0) + math.sqrt(max(disc, 0.0)))
        if alpha <= 1.0 + 1e-6:
            return -math.expm1(-sigma * math.log1p(1.0 / N)), "euler"
        exponent = sigma / (alpha - 1.0)

    if power_like and alpha > 1.0 + 1e-6:
        t_n = power_tail_reciprocal(eq.r, N, alpha)
    else:
        ts = tail_sum_reciprocal(eq.r, N, horizon=8 * N, tol=1e-15 * N / eq.r(N), first_block=N)
        if not ts.converged:
            return 0.0, "constant"
        t_n = ts.value
    rn_tn = eq.r(N) * t_n
    if rn_tn <= 1.0:
        return 1.0, "zero"
    if exponent != 1.0:
        return -math.expm1(exponent * math.log1p(-1.0 / rn_tn)), "euler"
    return 1.0 / rn_tn, "tail"


def _horizon_schedule(K: int, max_horizon: int, first: int | None) -> list[int]:
    ext = first if first is not None else max(K, 32)
    out = []
    j = 0
    while True:
        N = K + ext * (1 << j)
        if N > max_horizon and out:
            break
        out.append(N)
        j += 1
        if N > max_horizon:
            break
    return out


def _recessive_at(eq: LinearEq, N: int, terminal: str, precision: str):
    m = eq.m
    g, label = terminal_decrement(eq, N, terminal)
    if precision == "extended":
        r, p = eq.mp_coefficients(m, N)
        w = _kernels.backward_mp(r, p, mpmath.mpf(g))
        return w, label
    r, p = eq.coefficients(m, N)
    w = _kernels.backward(r, p, g)
    return w, label


def _aitken(prev2: np.ndarray, prev1: np.ndarray, cur: np.ndarray) -> np.ndarray | None:
    """Extrapolate three candidates whose errors lie along one direction.

    Backward-recurrence candidates normalized at ``m`` differ from the
    recessive solution by a multiple of one fixed dominant solution, so the
    differences are parallel and Aitken's delta-squared step applies to the
    scalar multiples.  The result is an affine combination of solutions with
    weights summing to one, hence again a normalized solution.  Returns None
    when the differences are not parallel or do not contract.
    """
    n = prev2.shape[0]
    d1 = prev1[:n] - prev2
    d2 = cur[:n] - prev1[:n]
    nd1 = float(np.dot(d1, d1))
    if nd1 == 0.0:
        return None
    rho = float(np.dot(d2, d1)) / nd1
    if not 0.0 < rho < 0.95:
        return None
    if np.linalg.norm(d2 - rho * d1) > 1e-3 * np.linalg.norm(d2):
        return None
    return cur[:n] + (rho / (1.0 - rho)) * d2


def recessive(
    eq: LinearEq,
    y_m: float,
    K: int,
    tol: float = 1e-10,
    *,
    terminal: str = "auto",
    max_horizon: int = 1 << 21,
    first_extension: int | None = None,
    precision: str = "double",
    accelerate: bool = True,
) -> RecessiveReport:
    """Recessive solution normalized to ``u_m = y_m``, reported on ``[m, K]``.

    Backward recurrence from terminal data at ``N = K + e, K + 2e, K + 4e, ...``
    until the maximal pointwise relative change on ``[m, K]`` between two
    consecutive estimates is at most ``tol``.  With ``accelerate`` (double
    precision only) the estimates are Aitken extrapolations of the last three
    candidates whenever their differences are parallel and contracting.

    Raises:
        PreconditionError: if ``y_m <= 0`` or ``K <= m + 1``.
        OscillationError: if a candidate has a generalized zero on ``[m, K]``.
        NoStabilizationError: if ``max_horizon`` is reached first.
    """
    m = eq.m
    if y_m <= 0:
        raise PreconditionError("recessive: y_m must be positive")
    if K <= m + 1:
        raise PreconditionError(f"recessive: need K > m + 1, got K={K}")
    extended = precision == "extended"
    ctx = mpmath.workprec(EXTENDED_PREC) if extended else contextlib.nullcontext()
    n_win = K - m + 1
    horizons: list[int] = []
    changes: list[float] = []
    fulls: list[np.ndarray] = []
    est = None
    est_full = None
    est_mp = None
    label = terminal
    with ctx:
        for N in _horizon_schedule(K, max_horizon, first_extension):
            try:
                w, label = _recessive_at(eq, N, terminal, precision)
            except DomainError:
                if est is not None and changes and changes[-1] <= tol:
                    break
                raise
            if extended:
                scale = mpmath.mpf(y_m) / w[0]
                w_mp = [v * scale for v in w]
                full = np.array([float(v) for v in w_mp])
            else:
                with np.errstate(all="ignore"):
                    full = w * (y_m / w[0])
                full[0] = y_m
                w_mp = None
            _check_candidate(eq, full[:n_win], N)
            horizons.append(N)
            fulls.append(full)
            cand_full = full
            if accelerate and not extended and len(fulls) >= 3:
                acc = _aitken(fulls[-3], fulls[-2], full)
                if acc is not None and not generalized_zeros_array(acc[:n_win], m):
                    cand_full = acc
            cand = cand_full[:n_win]
            if est is not None:
                with np.errstate(divide="ignore", invalid="ignore"):
                    rel = np.abs(cand - est) / np.abs(cand)
                changes.append(float(np.max(rel)))
            est, est_full, est_mp = cand, cand_full, w_mp
            if changes and changes[-1] <= tol:
                break
    if not changes or changes[-1] > tol:
        raise NoStabilizationError(
            f"{eq.name}: recessive did not stabilize to {tol:g} by horizon {horizons[-1]} "
            f"(last change {changes[-1] if changes else math.nan:.3g})"
        )
    mp_window = est_mp[:n_win] if est_mp is not None else None
    trace = SolutionTrace(eq, est.copy(), K, mp_values=mp_window)
    r = eq.r.values(m, K - 1)
    with np.errstate(over="ignore", divide="ignore"):
        terms = 1.0 / (r * trace.values[:-1] * trace.values[1:])
    partial = np.cumsum(terms)
    n_long = (len(est_full) - 2) // 2 + 1
    return RecessiveReport(
        trace=trace,
        horizons_used=horizons,
        stabilization_error=changes[-1],
        divergence_partial_sums=partial,
        terminal=label,
        long_values=est_full[: max(n_long, n_win)].copy(),
        changes=changes,
    )


def _check_candidate(eq: LinearEq, window: np.ndarray, N: int) -> None:
    if not np.all(np.isfinite(window)):
        raise OscillationError(f"{eq.name}: non-finite recessive candidate at N={N}")
    zeros = generalized_zeros_array(window, eq.m)
    if zeros:
        raise OscillationError(f"{eq.name}: generalized zero at k={zeros[0]} (horizon {N})", zeros[0])


# -- divergence diagnostics ---------------------------------------------------


def divergence_sum_at(eq: LinearEq, values: np.ndarray, horizons: list[int]) -> list[float]:
    """``S_N = sum_{j=m}^{N-1} 1/(r_j y_j y_{j+1})`` for each ``N`` in ``horizons``."""
    m = eq.m
    top = max(horizons)
    r = eq.r.values(m, top - 1)
    y = np.asarray(values[: top - m + 1])
    with np.errstate(over="ignore", divide="ignore"):
        terms = 1.0 / (r * y[:-1] * y[1:])
    cum = np.concatenate([[0.0], np.cumsum(terms)])
    return [float(cum[N - m]) for N in horizons]


def sum_grows(sums: list[float], delta: float) -> bool:
    """True when every doubling adds at least ``delta`` to the partial sum."""
    return all(b >= a + delta for a, b in zip(sums, sums[1:]))


def sum_converges(sums: list[float], rtol: float = 0.05, ratio_max: float = 0.9) -> bool:
    """Cauchy-tail test on partial sums sampled at doubled horizons.

    The increments between successive samples must shrink geometrically and
    the extrapolated remainder must be at most ``rtol`` of the sum.
    """
    if len(sums) < 3:
        return False
    inc = [b - a for a, b in zip(sums, sums[1:])]
    tail, _, ok = block_tail(inc, ratio_max)
    return ok and tail <= rtol * abs(sums[-1])


# -- tail asymptotics --------------------------------------------------------


def finite_horizon(eq: LinearEq, horizon: int) -> int:
    """Largest index <= ``horizon`` up to which both coefficients are finite.

    Exponentially growing coefficients overflow double precision near
    ``k = 1000``; tail tests are then confined to the representable range.
    """
    r = eq.r.values(eq.m, horizon, check_finite=False)
    p = eq.p.values(eq.m, horizon, check_finite=False)
    ok = np.isfinite(r) & np.isfinite(p) & (r < 1e300) & (p < 1e300)
    if ok.all():
        return horizon
    return eq.m + int(np.argmin(ok)) - 1


def h2_type_test(eq: LinearEq, horizon: int) -> tuple[bool, list[float]]:
    """Cauchy-tail test for ``sum_j p_j sum_{i>j} 1/r_i``.

    Returns the verdict and the partial sums at the ends of doubled blocks.
    """
    m = eq.m
    horizon = finite_horizon(eq, horizon)
    p = eq.p.values(m, horizon)
    t_next = reciprocal_tails(eq.r, m + 1, horizon + 1, 8 * horizon)  # T_{j+1}
    terms = p * t_next
    blocks = []
    sums = []
    for lo, hi in doubling_blocks(m, horizon):
        if hi - 1 > horizon:
            break
        blocks.append(math.fsum(terms[lo - m : hi - m]))
        sums.append(math.fsum(blocks))
    _, _, ok = block_tail(blocks)
    return ok, sums


def tail_asymptote(eq: LinearEq, report: RecessiveReport, horizon: int = 1 << 16,
                   spread: float = 0.05) -> float:
    """Fit ``d = lim u_k / sum_{j>=k} 1/r_j`` from the recessive report.

    The ratio is sampled at ``K/4``, ``K/2`` and ``K``; the value at ``K`` is
    returned and stored in ``report.trace.tail_constant``.

    Raises:
        HypothesisViolatedError: if ``sum 1/r`` or ``sum p_j sum_{i>j} 1/r_i``
            fails its convergence test.
        UnstableFitError: if the three samples spread by more than ``spread``.
    """
    m = eq.m
    horizon = finite_horizon(eq, horizon)
    h1 = tail_sum_reciprocal(eq.r, m, horizon=horizon)
    if not h1.converged:
        raise HypothesisViolatedError(f"{eq.name}: sum 1/r_j does not converge")
    ok, _ = h2_type_test(eq, horizon)
    if not ok:
        raise HypothesisViolatedError(
            f"{eq.name}: sum p_j sum_(i>j) 1/r_i fails the Cauchy-tail test"
        )
    trace = report.trace
    K = trace.horizon
    idx = sorted({max(m, K // 4), max(m, K // 2), K})
    ratios = tail_ratio_samples(eq, trace, idx)
    d = ratios[-1]
    if d == 0 or not math.isfinite(d):
        raise UnstableFitError(f"{eq.name}: degenerate tail ratio {d}")
    if (max(ratios) - min(ratios)) > spread * abs(d):
        raise UnstableFitError(
            f"{eq.name}: tail ratio has not plateaued (samples {ratios}, spread > {spread:.0%})"
        )
    trace.tail_constant = d
    return d


def tail_ratio_samples(eq: LinearEq, trace: SolutionTrace, idx: list[int]) -> list[float]:
    """``u_k / sum_{j>=k} 1/r_j`` at the requested indices."""
    m, K = trace.m, trace.horizon
    tails = reciprocal_tails(eq.r, m, K)
    return [trace(k) / tails[k - m] for k in idx]


def as_float_list(values: Any) -> list[float]:
    return [float(v) for v in values]
