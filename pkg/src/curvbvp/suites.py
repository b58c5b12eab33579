"""Seeded property suites for the linear and decay machinery.

Random equations are drawn from the library families: a majorant
``λ·(R̂, P̂)`` and a minorant with ``r = λR̂ (1 + δ + η_k)`` and
``p = λP̂ (1 - ε)(1 - ν_k)``, where ``δ, ε`` are constants in ``[0.1, 0.5]``
and ``η, ν`` are small per-index noise on a finite window.  Every suite is
deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .bvp.library import LibraryMajorant, euler_product_residuals, euler_reciprocal, library_majorants
from .bvp.model import linearized_majorant, sine_cubic_problem
from .decay import check_domination, discrepancy_example, product_bound, product_tends_to_zero
from .errors import CurvBVPError
from .linrec import (
    LinearEq,
    divergence_sum_at,
    finite_horizon,
    recessive,
    riccati_array,
    solve_ivp,
    sum_converges,
)
from .seq_core import HalfLineSeq
from .sturm import MajorantPair, verify_riccati_comparison, verify_trec


@dataclass
class SuiteResult:
    """Outcome of a suite: ``passed`` of ``total`` cases, with failure notes."""

    name: str
    seed: int | None
    passed: int
    total: int
    failures: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.passed == self.total and self.total > 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "suite": self.name,
            "seed": self.seed,
            "ok": self.ok,
            "passed": self.passed,
            "total": self.total,
            "failures": self.failures,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- random equations ----------------------------------------------------------


def _modulated(base: HalfLineSeq, factor: float, noise: np.ndarray, sign: float, name: str) -> HalfLineSeq:
    m = base.start
    last = m + len(noise) - 1

    def fn(ks: np.ndarray) -> np.ndarray:
        vals = base.values(int(ks[0]), int(ks[-1]), check_finite=False) * factor
        inside = ks <= last
        if inside.any():
            vals = vals.copy()
            vals[inside] *= 1.0 + sign * noise[ks[inside] - m]
        return vals

    return HalfLineSeq(fn, m, name)


@dataclass
class RandomPair:
    """A library majorant at scale ``lam`` and a randomly weakened minorant."""

    family: LibraryMajorant
    lam: float
    delta: float
    eps: float
    minor: LinearEq
    major: LinearEq


def random_pair(rng: np.random.Generator, window: int, family: LibraryMajorant | None = None) -> RandomPair:
    """Draw a majorant pair whose noise lives on ``[m, m + window]``."""
    fams = library_majorants(validate=False)
    fam = family or fams[int(rng.integers(len(fams)))]
    lam = float(np.exp(rng.uniform(math.log(0.5), math.log(2.0))))
    delta, eps = (float(v) for v in rng.uniform(0.1, 0.5, size=2))
    eta = rng.uniform(0.0, 0.1, size=window + 1)
    nu = rng.uniform(0.0, 0.1, size=window + 1)
    major = fam.equation(lam)
    r = _modulated(major.r, 1.0 + delta, eta / (1.0 + delta), 1.0, "r")
    p = _modulated(major.p, 1.0 - eps, nu, -1.0, "p")
    minor = LinearEq(r, p, fam.m, f"{fam.name}-minor")
    return RandomPair(fam, lam, delta, eps, minor, major)


def _window(rng: np.random.Generator, fam: LibraryMajorant, lo: int, hi: int) -> int:
    # exponential coefficients overflow near k = 1000; keep their windows short
    return int(rng.integers(lo, min(hi, 120) if fam.name == "geometric" else hi))


# -- suites ----------------------------------------------------------------------


def euler_witness_suite(n_euler: int = 50, n_families: int = 100) -> SuiteResult:
    """Exact rational residuals of the product identity and the library witnesses."""
    failures = []
    details: dict[str, Any] = {}
    res = euler_product_residuals(n_euler)
    details["euler_product"] = {"max_abs_residual": str(max(abs(v) for v in res)), "n": n_euler}
    if any(v != 0 for v in res):
        failures.append("euler_product: nonzero residual")
    for fam in library_majorants(validate=False):
        n = n_euler if fam.name == "eunew2" else n_families
        resid = fam.exact_residuals(n)
        ok = all(v == 0 for v in resid) and fam.validate(n)
        details[fam.name] = {"max_abs_residual": str(max(abs(v) for v in resid)), "n": n,
                             "positive_decreasing": fam.validate(n)}
        if not ok:
            failures.append(f"{fam.name}: witness check failed")
    total = 1 + len(library_majorants(validate=False))
    return SuiteResult("euler-witnesses", None, total - len(failures), total, failures, details)


def domination_suite(seed: int, n: int = 100, length: int = 200) -> SuiteResult:
    """Random ``(x, z, M)`` with ``Δx/x <= M Δz/z`` and ``x_m <= c``: ``x`` stays below the product bound."""
    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0
    for i in range(n):
        M = float(rng.uniform(0.05, 0.95))
        c = float(rng.uniform(0.1, 10.0))
        zr = rng.uniform(0.0, 0.5, size=length)
        z = np.concatenate([[1.0], np.cumprod(1.0 - zr)])
        q = M * np.diff(z) / z[:-1]
        shrink = rng.uniform(0.0, 0.5, size=length) * (rng.uniform(size=length) < 0.7)
        x = c * float(rng.uniform(0.1, 1.0)) * np.concatenate([[1.0], np.cumprod((1.0 + q) * (1.0 - shrink))])
        bound = product_bound(c, M, HalfLineSeq.from_array(z, 1), length + 1, 1)
        rep = check_domination(x, bound)
        worst = max(worst, rep.max_ratio)
        if not rep.ok:
            failures.append(f"case {i}: x exceeds the bound at k={rep.first_violation}")
    return SuiteResult("decay", seed, n - len(failures), n, failures, {"max_ratio": worst})


DECAY_DRIVERS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    "geometric": (lambda ks: np.exp2(-ks.astype(np.float64)), 0.5),
    "power": (lambda ks: ks.astype(np.float64) ** -3.0, 0.5),
    "log": (lambda ks: np.log(ks + 2.0) ** -16.0, 0.5),
}


def product_decay_suite(tol: float = 1e-6, horizon_cap: int = 10**6) -> SuiteResult:
    """``prod (1 + M Δz/z) <= tol`` is reached for geometric, power and logarithmic drivers."""
    failures = []
    details = {}
    for name, (fn, M) in DECAY_DRIVERS.items():
        v = product_tends_to_zero(HalfLineSeq(fn, 1, name), M, tol, horizon_cap)
        details[name] = v.to_dict()
        if v.verdict != "evidenced":
            failures.append(f"{name}: {v.verdict}")
    return SuiteResult("product-decay", None, 3 - len(failures), 3, failures, details)


def discrepancy_suite(K: int = 20) -> SuiteResult:
    """Bounded Riccati domination with an unbounded quotient, checked exactly."""
    rep = discrepancy_example(K)
    checks = {"domination": all(rep.domination),
              "exponent_identity": rep.log2_ratio == [2**k for k in range(1, K + 1)]}
    failures = [k for k, v in checks.items() if not v]
    return SuiteResult("discrepancy", None, 2 - len(failures), 2, failures, rep.to_dict())


def trec_suite(seed: int, n: int = 100, tol: float = 1e-9) -> SuiteResult:
    """The minorant's recessive Riccati ratio stays below the majorant witness's."""
    rng = np.random.default_rng(seed)
    failures = []
    margins = []
    for i in range(n):
        fam = library_majorants(validate=False)[i % 3]
        hi = _window(rng, fam, 50, 300)
        pair = random_pair(rng, hi + 2, fam)
        x = fam.witness_trace(hi + 1, pair.lam)
        try:
            rep = verify_trec(MajorantPair(pair.minor, pair.major, fam.m, hi), x, tol)
        except CurvBVPError as exc:
            failures.append(f"case {i} ({fam.name}): {type(exc).__name__}: {exc}")
            continue
        margins.append(rep.margin)
        if not rep.ok:
            failures.append(f"case {i} ({fam.name}): {rep.violation} at k={rep.first_violation}")
    return SuiteResult("trec", seed, n - len(failures), n, failures,
                       {"min_margin": min(margins) if margins else None})


def reference_trec_pairs(hi: int = 500, tol: float = 1e-9) -> SuiteResult:
    """Two fixed pairs: the Euler equation under the product family, and the
    linearized sine-cubic equation under the Euler equation at ``λ = 1/4``."""
    from .bvp.library import EUNEW2

    failures = []
    details = {}
    eur = euler_reciprocal(1.0)
    rep1 = verify_trec(MajorantPair(eur, EUNEW2.equation(), 1, hi), EUNEW2.witness_trace(hi + 1), tol)
    details["euler_vs_product"] = rep1.to_dict()
    if not rep1.ok:
        failures.append("euler_vs_product")
    eq = linearized_majorant(sine_cubic_problem(1.0), scaled=True)
    major = euler_reciprocal(0.25)
    x = recessive(major, 1.0, hi + 1).trace
    rep2 = verify_trec(MajorantPair(eq, major, 1, hi), x, tol)
    details["sine_cubic_vs_euler"] = rep2.to_dict()
    if not rep2.ok:
        failures.append("sine_cubic_vs_euler")
    return SuiteResult("trec-reference", None, 2 - len(failures), 2, failures, details)


def riccati_comparison_suite(seed: int, n: int = 100, tol: float = 1e-9) -> SuiteResult:
    """A minorant solution starting above the majorant's Riccati ratio stays above and positive."""
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n):
        fam = library_majorants(validate=False)[i % 3]
        hi = _window(rng, fam, 50, 300)
        pair = random_pair(rng, hi + 2, fam)
        x = fam.witness_trace(hi + 1, pair.lam)
        m = fam.m
        wx = pair.major.r(m) * (x(m + 1) - x(m)) / x(m)
        theta = float(rng.uniform(0.0, 0.5))
        y0 = x(m)
        y1 = y0 + (1.0 - theta) * wx * y0 / pair.minor.r(m)
        try:
            y = solve_ivp(pair.minor, y0, y1, hi + 1)
            rep = verify_riccati_comparison(MajorantPair(pair.minor, pair.major, m, hi), x, y, tol)
        except CurvBVPError as exc:
            failures.append(f"case {i} ({fam.name}): {type(exc).__name__}: {exc}")
            continue
        if not rep.ok:
            failures.append(f"case {i} ({fam.name}): {rep.violation} at k={rep.first_violation}")
    return SuiteResult("riccati-comparison", seed, n - len(failures), n, failures)


def _forward_step_error(eq: LinearEq, u: np.ndarray) -> float:
    m = eq.m
    K = m + len(u) - 1
    r = eq.r.values(m, K - 1)
    p = eq.p.values(m, K - 2)
    q = r[:-1] * np.diff(u[:-1]) - p * u[1:-1]
    pred = u[1:-1] + q / r[1:]
    return float(np.max(np.abs(pred - u[2:]) / np.abs(u[2:])))


def recessive_suite(seed: int, n: int = 100, n_dominant: int = 20, tol: float = 1e-10) -> SuiteResult:
    """Forward consistency, Riccati minimality and sum divergence of recessive solutions.

    For each random minorant ``u`` is computed on ``[m, 4K₀]``; then

    - one forward step from ``(u_k, u_{k+1})`` reproduces ``u_{k+2}`` to ``tol``;
    - ``w_u <= w_y`` on ``[2K₀, 4K₀)`` for ``n_dominant`` solutions ``y`` with
      ``y_m = u_m`` and ``y_{m+1} > u_{m+1}``;
    - ``S_N = sum 1/(r u u)`` increases strictly over ``N = K₀, 2K₀, 4K₀`` while
      the analogous sum for a dominant solution passes the Cauchy-tail test.
    """
    rng = np.random.default_rng(seed)
    failures = []
    worst_fwd = 0.0
    for i in range(n):
        fam = library_majorants(validate=False)[i % 3]
        K0 = _window(rng, fam, 20, 120) if fam.name != "geometric" else int(rng.integers(20, 60))
        K = 4 * K0
        pair = random_pair(rng, K + 2, fam)
        eq, m = pair.minor, fam.m
        try:
            rep = recessive(eq, 1.0, K, tol)
        except CurvBVPError as exc:
            failures.append(f"case {i} ({fam.name}): {type(exc).__name__}: {exc}")
            continue
        u = rep.trace.values
        fwd = _forward_step_error(eq, u)
        worst_fwd = max(worst_fwd, fwd)
        if fwd > tol:
            failures.append(f"case {i} ({fam.name}): forward step error {fwd:.3g}")
            continue
        wu = riccati_array(eq, u)
        lo = 2 * K0 - m
        bad_min = 0
        H = finite_horizon(eq, 1 << 18) - 1
        dom_ok = True
        for j in range(n_dominant):
            # the first dominant solution is far from u, so its sum settles within the horizon
            theta = 1.0 if j == 0 else float(np.exp(rng.uniform(math.log(1e-3), 0.0)))
            y = solve_ivp(eq, u[0], u[1] * (1.0 + theta), max(K, H if j == 0 else K)).values
            wy = riccati_array(eq, y[: K + 1 - m])
            scale = np.maximum(np.abs(wu[lo:]), np.abs(wy[lo:]))
            if np.any(wy[lo:] - wu[lo:] < -1e-9 * scale):
                bad_min += 1
            if j == 0:
                hs = [H // 8, H // 4, H // 2, H]
                dom_ok = sum_converges(divergence_sum_at(eq, y, hs))
        sums = divergence_sum_at(eq, u, [K0, 2 * K0, 4 * K0])
        grows = sums[0] < sums[1] < sums[2]
        if bad_min:
            failures.append(f"case {i} ({fam.name}): minimality fails for {bad_min} dominant solutions")
        elif not grows:
            failures.append(f"case {i} ({fam.name}): recessive sums do not increase {sums}")
        elif not dom_ok:
            failures.append(f"case {i} ({fam.name}): dominant sum fails the Cauchy-tail test")
    return SuiteResult("riccati-minimality", seed, n - len(failures), n, failures,
                       {"max_forward_step_error": worst_fwd})


SUITES: dict[str, Callable[[int], SuiteResult]] = {
    "euler-witnesses": lambda seed: euler_witness_suite(),
    "decay": lambda seed: domination_suite(seed),
    "product-decay": lambda seed: product_decay_suite(),
    "discrepancy": lambda seed: discrepancy_suite(),
    "trec": lambda seed: trec_suite(seed),
    "trec-reference": lambda seed: reference_trec_pairs(),
    "riccati-comparison": lambda seed: riccati_comparison_suite(seed),
    "riccati-minimality": lambda seed: recessive_suite(seed),
}
