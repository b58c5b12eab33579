"""Problem data for ``Δ(a_k Φ(Δx_k)) + b_k F(x_{k+1}) = 0`` with ``x_m = c``.

Holds the curvature operator, the nonlinearity ``F``, hypothesis checks, the
constant ``L_c = sup_{0<u<=c} F(u)/u`` and the linearized majorant

    Δ(a_k / sqrt(1 + c²) Δz_k) + L_c b_k z_{k+1} = 0.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any

import numpy as np

from ..errors import (
    DomainError,
    HypothesisViolatedError,
    InvalidParameterError,
    NonPositiveCoefficientError,
    UnboundedRatioError,
)
from ..linrec import LinearEq, finite_horizon, h2_type_test
from ..seq_core import (
    HalfLineSeq,
    SeqFamily,
    _NumpyNS,
    compile_expression,
    make_seq,
    tail_sum_reciprocal,
)


class CurvatureOperator:
    """``Φ(v) = v / sqrt(1 + v²)`` and ``J(v) = 1 / sqrt(1 + v²)``, so ``Φ = v J``."""

    @staticmethod
    def phi(v: Any) -> Any:
        return v / np.hypot(1.0, v)

    @staticmethod
    def J(v: Any) -> Any:
        return 1.0 / np.hypot(1.0, v)

    @staticmethod
    def inverse_phi(w: Any) -> Any:
        """``Φ^{-1}(w) = w / sqrt(1 - w²)`` for ``|w| < 1``."""
        w = np.asarray(w, dtype=np.float64)
        if np.any(np.abs(w) >= 1.0):
            raise DomainError("inverse_phi needs |w| < 1")
        return w / np.sqrt((1.0 - w) * (1.0 + w))


# -- the nonlinearity --------------------------------------------------------

F_KINDS = ("power", "linear", "table", "custom")


@dataclass(frozen=True)
class RatioLimit:
    """Estimate of ``lim_{u->0+} F(u)/u``.

    ``status`` is ``limit`` (plateau found), ``unbounded`` (monotone growth
    without slowing) or ``oscillatory`` (neither).
    """

    value: float
    status: str
    samples: tuple[float, ...] = ()

    @property
    def finite(self) -> bool:
        return self.status == "limit" and math.isfinite(self.value)


@dataclass(frozen=True)
class FSpec:
    """The nonlinearity ``F``, extended to ``u < 0`` as an odd function.

    Attributes:
        kind: ``power`` (``|u|^gamma sign u``), ``linear``, ``table`` (piecewise
            linear through ``(0, 0)`` and the given nodes) or ``custom`` (an
            expression in ``u``).
        gamma: Exponent of the power kind.
        nodes: Increasing positive abscissae of the table kind.
        values: ``F`` at ``nodes``.
        expr: Expression of the custom kind.
    """

    kind: str
    gamma: float = 1.0
    nodes: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    expr: str = ""

    def __post_init__(self) -> None:
        if self.kind not in F_KINDS:
            raise InvalidParameterError(f"unknown F kind {self.kind!r}; expected one of {F_KINDS}")
        if self.kind == "power" and not self.gamma > 0:
            raise InvalidParameterError(f"power F needs gamma > 0, got {self.gamma}")
        if self.kind == "table":
            u = np.asarray(self.nodes, dtype=np.float64)
            if u.size == 0 or u.size != len(self.values):
                raise InvalidParameterError("table F needs matching non-empty nodes and values")
            if u[0] <= 0 or np.any(np.diff(u) <= 0):
                raise InvalidParameterError("table F nodes must be positive and increasing")
        if self.kind == "custom":
            compile_expression(self.expr, "u")

    @classmethod
    def power(cls, gamma: float) -> FSpec:
        return cls("power", gamma=float(gamma))

    @classmethod
    def linear(cls) -> FSpec:
        return cls("linear")

    @classmethod
    def table(cls, nodes: Any, values: Any) -> FSpec:
        return cls("table", nodes=tuple(map(float, nodes)), values=tuple(map(float, values)))

    @classmethod
    def custom(cls, expr: str) -> FSpec:
        return cls("custom", expr=expr)

    @cached_property
    def _compiled(self) -> Any:
        return compile_expression(self.expr, "u")

    def __call__(self, u: Any) -> Any:
        arr = np.asarray(u, dtype=np.float64)
        out = self._eval(arr)
        return float(out) if np.ndim(u) == 0 else out

    def _eval(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return u.copy()
        if self.kind == "power":
            return np.sign(u) * np.abs(u) ** self.gamma
        if self.kind == "table":
            au = np.abs(u)
            if np.any(au > self.nodes[-1]):
                raise DomainError(f"table F is defined on [0, {self.nodes[-1]}]")
            xs = np.concatenate([[0.0], self.nodes])
            ys = np.concatenate([[0.0], self.values])
            return np.sign(u) * np.interp(au, xs, ys)
        with np.errstate(all="ignore"):
            out = self._compiled(u, _NumpyNS)
        return np.broadcast_to(np.asarray(out, dtype=np.float64), u.shape).copy()

    def ratio(self, u: Any) -> np.ndarray:
        """``F̃(u) = F(u)/u`` with ``F̃(0)`` the limit at ``0+``."""
        u = np.asarray(u, dtype=np.float64)
        out = np.empty(u.shape)
        zero = u == 0
        nz = ~zero
        if self.kind == "power":
            out[nz] = np.abs(u[nz]) ** (self.gamma - 1.0)
        elif self.kind == "linear":
            out[nz] = 1.0
        else:
            out[nz] = self._eval(u[nz]) / u[nz]
        if zero.any():
            out[zero] = self.ratio_at_zero().value
        return out

    def ratio_at_zero(self) -> RatioLimit:
        """Limit of ``F(u)/u`` at ``0+``, with a plateau test for general kinds."""
        if self.kind == "linear":
            return RatioLimit(1.0, "limit")
        if self.kind == "power":
            if self.gamma > 1:
                return RatioLimit(0.0, "limit")
            if self.gamma == 1:
                return RatioLimit(1.0, "limit")
            return RatioLimit(math.inf, "unbounded")
        if self.kind == "table":
            return RatioLimit(self.values[0] / self.nodes[0], "limit")
        us = 10.0 ** -np.arange(2, 16, dtype=np.float64)
        with np.errstate(all="ignore"):
            rs = self._eval(us) / us
        samples = tuple(float(v) for v in rs)
        if not np.all(np.isfinite(rs)):
            return RatioLimit(math.inf, "unbounded", samples)
        last = rs[-5:]
        inc = np.diff(last)
        if abs(inc[-1]) <= 1e-9 * max(1.0, abs(last[-1])) and abs(inc[-2]) <= 1e-7 * max(1.0, abs(last[-1])):
            # samples shrink tenfold: remove the linear term of r(u) = L + s u + ...
            return RatioLimit(float(last[-1] + inc[-1] / 9.0), "limit", samples)
        if np.all(inc > 0) and np.all(inc[1:] >= 0.5 * inc[:-1]):
            return RatioLimit(math.inf, "unbounded", samples)
        return RatioLimit(float(last[-1]), "oscillatory", samples)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "power":
            return {"kind": "power", "gamma": self.gamma}
        if self.kind == "table":
            return {"kind": "table", "nodes": list(self.nodes), "values": list(self.values)}
        if self.kind == "custom":
            return {"kind": "custom", "expr": self.expr}
        return {"kind": "linear"}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FSpec:
        data = dict(data)
        kind = data.pop("kind", None)
        allowed = {"power": {"gamma"}, "linear": set(), "table": {"nodes", "values"},
                   "custom": {"expr"}}
        if kind not in allowed:
            raise InvalidParameterError(f"unknown F kind {kind!r}; expected one of {F_KINDS}")
        unknown = set(data) - allowed[kind]
        if unknown:
            raise InvalidParameterError(f"unknown keys for F kind {kind}: {sorted(unknown)}")
        if kind == "table":
            return cls.table(data.get("nodes", []), data.get("values", []))
        if kind == "power":
            if "gamma" not in data:
                raise InvalidParameterError("power F needs 'gamma'")
            return cls.power(data["gamma"])
        if kind == "custom":
            return cls.custom(str(data.get("expr", "")))
        return cls.linear()


# -- the problem -------------------------------------------------------------


@dataclass
class BVPSpec:
    """``Δ(a_k Φ(Δx_k)) + b_k F(x_{k+1}) = 0`` on ``k >= m`` with ``x_m = c``.

    ``a_family`` and ``b_family`` are kept when the coefficients come from
    parametric families, so the problem can be serialized.
    """

    a: HalfLineSeq
    b: HalfLineSeq
    F: FSpec
    m: int
    c: float
    name: str = "bvp"
    a_family: SeqFamily | None = None
    b_family: SeqFamily | None = None

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise InvalidParameterError(f"boundary value c must be positive, got {self.c}")

    @classmethod
    def from_families(cls, a: SeqFamily, b: SeqFamily, F: FSpec, m: int, c: float,
                      name: str = "bvp") -> BVPSpec:
        return cls(make_seq(a, m, "a"), make_seq(b, m, "b"), F, m, float(c), name, a, b)

    def with_c(self, c: float) -> BVPSpec:
        return replace(self, c=float(c))

    @property
    def M(self) -> float:
        return 1.0 / math.sqrt(1.0 + self.c * self.c)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "m": self.m,
            "c": self.c,
            "a": self.a_family.to_dict() if self.a_family else None,
            "b": self.b_family.to_dict() if self.b_family else None,
            "F": self.F.to_dict(),
        }

    def fingerprint(self, n: int = 16) -> str:
        """Hash of the serialized data plus the first ``n`` coefficient values."""
        h = hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.a.values(self.m, self.m + n - 1, check_finite=False)).tobytes())
        h.update(np.ascontiguousarray(self.b.values(self.m, self.m + n - 1, check_finite=False)).tobytes())
        return h.hexdigest()[:16]

    def b_vanishes(self, hi: int) -> bool:
        """True when ``b_k = 0`` on ``[m, hi]``."""
        return bool(np.all(self.b.values(self.m, hi) == 0))


def sine_cubic_problem(c: float = 1.0) -> BVPSpec:
    """``a_k = (k+1)²``, ``b_k = |sin k| / (4 sqrt(2) k)``, ``F(u) = u³`` on ``k >= 1``."""
    return BVPSpec.from_families(
        SeqFamily.power(2.0, 1.0),
        SeqFamily.scaled_abs_sin(1.0 / (4.0 * math.sqrt(2.0))),
        FSpec.power(3.0),
        1,
        c,
        name="sine-cubic",
    )


# -- hypotheses ----------------------------------------------------------------


@dataclass
class HypothesisItem:
    """One hypothesis: ``status`` is ``pass``, ``fail`` or ``inconclusive``."""

    status: str
    evidence: dict[str, Any] = field(default_factory=dict)


HYPOTHESES = ("reciprocal_a_summable", "weighted_tail_summable", "sign_condition")


@dataclass
class HypothesisReport:
    """Results keyed by :data:`HYPOTHESES`.

    ``reciprocal_a_summable``: ``sum 1/a_j < ∞``.
    ``weighted_tail_summable``: ``sum_j b_j sum_{i>j} 1/a_i < ∞``.
    ``sign_condition``: ``F(u) u > 0`` for ``u != 0`` and ``F(u)/u`` has a
    finite limit at ``0+``.
    """

    items: dict[str, HypothesisItem]

    @property
    def failed(self) -> list[str]:
        return [k for k in HYPOTHESES if self.items[k].status == "fail"]

    @property
    def ok(self) -> bool:
        return not self.failed

    @property
    def all_pass(self) -> bool:
        return all(self.items[k].status == "pass" for k in HYPOTHESES)

    def to_dict(self) -> dict[str, Any]:
        return {k: {"status": v.status, "evidence": v.evidence} for k, v in self.items.items()}


def _sign_check(F: FSpec, c: float, n: int = 200) -> tuple[bool, float | None]:
    u = c * np.geomspace(1e-12, 1.0, n)
    both = np.concatenate([-u[::-1], u])
    try:
        vals = F(both)
    except DomainError:
        return False, None
    bad = ~(vals * both > 0)
    if bad.any():
        return False, float(both[int(np.argmax(bad))])
    return True, None


def check_hypotheses(spec: BVPSpec, horizon: int = 1 << 16) -> HypothesisReport:
    """Numerical checks of the summability and sign hypotheses.

    Every item is report-valued; nothing is raised for a failed hypothesis.
    """
    m = spec.m
    items: dict[str, HypothesisItem] = {}
    lin = LinearEq(spec.a, spec.b, m, "a,b")
    top = finite_horizon(lin, horizon)

    try:
        ts = tail_sum_reciprocal(spec.a, m, horizon=top)
        ev = {"sum": ts.value if ts.converged else None, "block_ratio": ts.block_ratio,
              "last_index": ts.last_index}
        items["reciprocal_a_summable"] = HypothesisItem("pass" if ts.converged else "fail", ev)
    except NonPositiveCoefficientError as exc:
        items["reciprocal_a_summable"] = HypothesisItem("fail", {"error": str(exc)})

    b = spec.b.values(m, top)
    if np.any(b < 0):
        items["weighted_tail_summable"] = HypothesisItem(
            "fail", {"error": f"b_k < 0 at k={m + int(np.argmax(b < 0))}"})
    elif items["reciprocal_a_summable"].status != "pass":
        items["weighted_tail_summable"] = HypothesisItem(
            "inconclusive", {"reason": "sum 1/a_j did not converge"})
    else:
        ok, sums = h2_type_test(lin, top)
        items["weighted_tail_summable"] = HypothesisItem(
            "pass" if ok else "fail", {"block_partial_sums": sums[-4:], "horizon": top})

    sign_ok, bad_u = _sign_check(spec.F, spec.c)
    rz = spec.F.ratio_at_zero()
    ev = {"ratio_at_zero": rz.value if math.isfinite(rz.value) else None,
          "ratio_status": rz.status, "first_bad_u": bad_u}
    if not sign_ok or rz.status == "unbounded":
        status = "fail"
    elif rz.status == "oscillatory":
        status = "inconclusive"
    else:
        status = "pass"
    items["sign_condition"] = HypothesisItem(status, ev)
    return HypothesisReport(items)


# -- L_c ----------------------------------------------------------------------


@dataclass(frozen=True)
class LcResult:
    """``L_c`` with the grid settings used (zero for closed forms)."""

    value: float
    method: str
    grid: int = 0
    refinements: int = 0
    argmax: float | None = None
    ratio_status: str = "limit"

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value if math.isfinite(self.value) else None,
            "finite": math.isfinite(self.value),
            "method": self.method,
            "grid": self.grid,
            "refinements": self.refinements,
            "argmax": self.argmax,
            "ratio_status": self.ratio_status,
        }


def lc_details(F: FSpec, c: float, grid: int = 1000, refinements: int = 2) -> LcResult:
    """``L_c = sup_{0<u<=c} F(u)/u`` with provenance.

    Power kinds use ``c^(gamma-1)`` (infinite for ``gamma < 1``); other kinds
    scan a geometric grid on ``(0, c]``, refine around the argmax and take the
    maximum with the limit at ``0+``.

    Raises:
        UnboundedRatioError: if ``F(u)/u`` grows without bound toward ``0``.
    """
    if not c > 0:
        raise InvalidParameterError("c must be positive")
    if F.kind == "power":
        v = c ** (F.gamma - 1.0) if F.gamma >= 1 else math.inf
        return LcResult(v, "closed-form", ratio_status="limit" if F.gamma >= 1 else "unbounded")
    if F.kind == "linear":
        return LcResult(1.0, "closed-form")
    if F.kind == "table":
        # F(u)/u is monotone between nodes, so the sup sits at a node or at c
        pts = np.array([u for u in F.nodes if u <= c] + [min(c, F.nodes[-1])])
        rs = F.ratio(pts)
        i = int(np.argmax(rs))
        return LcResult(max(float(rs[i]), F.ratio_at_zero().value), "closed-form", argmax=float(pts[i]))
    rz = F.ratio_at_zero()
    if rz.status == "unbounded":
        raise UnboundedRatioError(f"F(u)/u is unbounded as u -> 0+ (samples {rz.samples[-3:]})")
    us = c * np.geomspace(1e-12, 1.0, grid)
    best_u, best = 0.0, -math.inf
    lo_u, hi_u = us[0], us[-1]
    for level in range(refinements + 1):
        pts = us if level == 0 else np.linspace(lo_u, hi_u, grid)
        rs = F.ratio(pts)
        i = int(np.nanargmax(rs))
        if rs[i] > best:
            best, best_u = float(rs[i]), float(pts[i])
        lo_u, hi_u = pts[max(i - 1, 0)], pts[min(i + 1, len(pts) - 1)]
    if math.isfinite(rz.value):
        best = max(best, rz.value)
    return LcResult(best, "grid", grid, refinements, best_u, rz.status)


def compute_Lc(F: FSpec, c: float, grid: int = 1000, refinements: int = 2) -> float:
    """``L_c = sup_{0<u<=c} F(u)/u``; ``inf`` flags a ratio that blows up at ``0``."""
    return lc_details(F, c, grid, refinements).value


def linearized_majorant(spec: BVPSpec, *, scaled: bool = False, Lc: float | None = None) -> LinearEq:
    """``Δ(a_k/sqrt(1+c²) Δz_k) + L_c b_k z_{k+1} = 0``.

    With ``scaled=True`` both coefficients are multiplied by ``sqrt(1+c²)``,
    giving ``r = a`` and ``p = sqrt(1+c²) L_c b`` (same solutions).

    Raises:
        HypothesisViolatedError: if ``L_c`` is infinite.
    """
    Lc = compute_Lc(spec.F, spec.c) if Lc is None else Lc
    if not math.isfinite(Lc):
        raise HypothesisViolatedError("L_c is infinite: F(u)/u is unbounded near 0")
    s = math.sqrt(1.0 + spec.c * spec.c)
    if scaled:
        return LinearEq(spec.a, spec.b.scaled(s * Lc, "p"), spec.m, f"{spec.name}:linearized-scaled")
    return LinearEq(spec.a.scaled(1.0 / s, "r"), spec.b.scaled(Lc, "p"), spec.m,
                    f"{spec.name}:linearized")
