"""Product bounds driven by Riccati ratios and decay of infinite products.

For positive ``z`` and ``0 < M < 1`` the product
``b_k = c * prod_{j=m}^{k-1} (1 + M Δz_j / z_j)`` bounds every positive ``x``
with ``x_m <= c`` whose ratio ``Δx/x`` is dominated by ``M Δz/z``.  When ``z``
is nonincreasing and tends to zero the product tends to zero as well.
All products are accumulated in the log domain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .errors import DomainError, PreconditionError
from .seq_core import HalfLineSeq, doubling_blocks


def _ratio(z: np.ndarray) -> np.ndarray:
    return np.diff(z) / z[:-1]


@dataclass
class ProductBound:
    """``values[i] = c * prod_{j=m}^{m+i-1} (1 + M Δz_j / z_j)`` on ``[m, K]``."""

    base: float
    M: float
    driver: HalfLineSeq
    m: int
    K: int
    log_values: np.ndarray = field(repr=False)

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    def __call__(self, k: int) -> float:
        return float(math.exp(self.log_values[k - self.m]))

    def as_seq(self) -> HalfLineSeq:
        return HalfLineSeq.from_array(self.values, self.m, name="omega_bound")


def product_bound(c: float, M: float, z: HalfLineSeq, K: int, m: int | None = None) -> ProductBound:
    """The bound ``c * prod (1 + M Δz_j / z_j)`` on ``[m, K]``.

    Raises:
        PreconditionError: unless ``c > 0`` and ``0 < M < 1``.
        DomainError: if ``z`` is not positive on ``[m, K]``.
    """
    m = z.start if m is None else m
    if not c > 0:
        raise PreconditionError(f"product_bound: c must be positive, got {c}")
    if not 0 < M < 1:
        raise PreconditionError(f"product_bound: M must lie in (0, 1), got {M}")
    zv = z.values(m, K)
    if np.any(zv <= 0):
        raise DomainError(f"product_bound: driver not positive at k={m + int(np.argmax(zv <= 0))}")
    logs = np.empty(K - m + 1)
    logs[0] = math.log(c)
    logs[1:] = math.log(c) + np.cumsum(np.log1p(M * _ratio(zv)))
    return ProductBound(c, M, z, m, K, logs)


@dataclass
class DominationReport:
    """Outcome of :func:`check_domination`; truthy when ``x <= bound`` held."""

    ok: bool
    lo: int
    hi: int
    max_ratio: float
    first_violation: int | None = None

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "range": [self.lo, self.hi], "max_ratio": self.max_ratio,
                "first_violation": self.first_violation}


def check_domination(
    x: HalfLineSeq | np.ndarray,
    bound: ProductBound,
    lo: int | None = None,
    hi: int | None = None,
    slack: float = 1e-12,
) -> DominationReport:
    """Verify ``x_k <= bound_k (1 + slack)`` on ``[lo, hi]``.

    ``x`` may be a sequence or an array indexed from ``bound.m``.
    """
    lo = bound.m if lo is None else lo
    hi = bound.K if hi is None else hi
    if isinstance(x, HalfLineSeq):
        xv = x.values(lo, hi)
    else:
        xv = np.asarray(x, dtype=np.float64)[lo - bound.m : hi + 1 - bound.m]
    bv = bound.values[lo - bound.m : hi + 1 - bound.m]
    bad = xv > bv * (1.0 + slack)
    ratio = float(np.max(xv / bv))
    if bad.any():
        return DominationReport(False, lo, hi, ratio, lo + int(np.argmax(bad)))
    return DominationReport(True, lo, hi, ratio)


@dataclass
class DecayVerdict:
    """``verdict`` is ``evidenced`` or ``inconclusive``.

    ``steps`` counts the factors multiplied when the log product first fell
    below ``ln(tol)``; ``index`` is the last factor's index ``m + steps - 1``.
    """

    verdict: str
    tol: float
    log_product: float
    steps: int | None
    index: int | None
    horizon: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "tol": self.tol,
            "log_product": self.log_product,
            "steps": self.steps,
            "index": self.index,
            "horizon": self.horizon,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def product_tends_to_zero(
    z: HalfLineSeq, M: float, tol: float = 1e-6, horizon_cap: int = 10**6
) -> DecayVerdict:
    """Look for ``prod_{j=m}^{K-1} (1 + M Δz_j / z_j) <= tol`` with ``K - m <= horizon_cap``.

    Raises:
        PreconditionError: if ``Δz_k > 0`` is detected, ``z`` is not
            positive, or ``M`` is outside ``(0, 1)``.
    """
    if not 0 < M < 1:
        raise PreconditionError(f"M must lie in (0, 1), got {M}")
    m = z.start
    target = math.log(tol)
    total = 0.0
    done = 0
    for a, b in doubling_blocks(m, m + horizon_cap, first=256):
        zv = z.values(a, min(b, m + horizon_cap), cache=False)
        if np.any(zv <= 0):
            raise PreconditionError(f"driver not positive near k={a}")
        q = _ratio(zv)
        if np.any(q > 0):
            raise PreconditionError(f"driver increases at k={a + int(np.argmax(q > 0))}")
        logs = np.log1p(M * q)
        cum = total + np.cumsum(logs)
        hit = np.nonzero(cum <= target)[0]
        if hit.size:
            steps = done + int(hit[0]) + 1
            return DecayVerdict("evidenced", tol, float(cum[hit[0]]), steps, m + steps - 1, horizon_cap)
        total = float(cum[-1]) if cum.size else total
        done += logs.size
        if done >= horizon_cap:
            break
    return DecayVerdict("inconclusive", tol, total, None, None, horizon_cap)


@dataclass
class DiscrepancyReport:
    """Exact data for ``x_k = 2^{-2^k}`` against ``y_k = 2^{-2^{k+2}}``.

    ``domination[i]`` records ``Δx_k/x_k <= (1/2) Δy_k/y_k`` at ``k = i + 1``
    and ``log2_ratio[i]`` is ``log2(x_k / sqrt(y_k))``.
    """

    K: int
    domination: list[bool]
    log2_ratio: list[int]
    lhs_at_1: Fraction
    rhs_at_1: Fraction

    @property
    def ok(self) -> bool:
        return all(self.domination) and self.log2_ratio == [2**k for k in range(1, self.K + 1)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "K": self.K,
            "domination": self.domination,
            "log2_ratio": self.log2_ratio,
            "lhs_at_1": str(self.lhs_at_1),
            "rhs_at_1": str(self.rhs_at_1),
            "ok": self.ok,
        }


def discrepancy_example(K: int) -> DiscrepancyReport:
    """Bounded Riccati domination with an unbounded quotient ``x / sqrt(y)``.

    Every quantity is handled exactly: ratios ``Δx/x = 2^{-2^k} - 1`` as
    rationals and logarithms as integer exponents, so values like
    ``2^{2^k}`` never enter floating point.
    """
    if K < 2:
        raise PreconditionError("discrepancy_example needs K >= 2")
    dom: list[bool] = []
    ratios: list[int] = []
    lhs1 = rhs1 = Fraction(0)
    for k in range(1, K + 1):
        ex = 2**k  # x_k = 2^{-ex}
        ey = 2 ** (k + 2)  # y_k = 2^{-ey}
        # x_{k+1}/x_k = 2^{-(2ex - ex)}, y_{k+1}/y_k = 2^{-ey}
        lhs = Fraction(1, 2**ex) - 1
        rhs = (Fraction(1, 2**ey) - 1) / 2
        dom.append(lhs <= rhs)
        if k == 1:
            lhs1, rhs1 = lhs, rhs
        ratios.append(-ex + ey // 2)
    return DiscrepancyReport(K, dom, ratios, lhs1, rhs1)
