"""Half-line sequences, coefficient families and log-domain primitives.

A :class:`HalfLineSeq` is a real sequence on ``Z_m = {m, m+1, ...}`` evaluated
lazily.  Values are computed in fixed, aligned chunks and cached, so the value
at an index never depends on the order in which indices were requested.
"""

from __future__ import annotations

import ast
import functools
import math
import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import mpmath
import numpy as np

from .errors import (
    DomainError,
    ExpressionError,
    InvalidParameterError,
    NonPositiveCoefficientError,
)

_CHUNK = 4096

#: Working precision (bits) of the extended mode.
EXTENDED_PREC = 113

ArrayFn = Callable[[np.ndarray], np.ndarray]
ScalarFn = Callable[[int], Any]


class HalfLineSeq:
    """A lazily evaluated, memoized real sequence on ``k >= start``.

    Args:
        fn: Vectorized evaluator mapping an int64 array of indices to float64 values.
        start: First valid index ``m``.
        name: Label used in reports and error messages.
        mp_fn: Optional scalar evaluator returning ``mpmath.mpf`` for extended precision.
        stop: Optional last valid index (tables); ``None`` means unbounded.
    """

    def __init__(
        self,
        fn: ArrayFn,
        start: int,
        name: str = "seq",
        mp_fn: ScalarFn | None = None,
        stop: int | None = None,
    ):
        if start < 0:
            raise InvalidParameterError(f"start index must be >= 0, got {start}")
        self._fn = fn
        self.start = int(start)
        self.name = name
        self._mp_fn = mp_fn
        self.stop = stop
        self._chunks: dict[int, np.ndarray] = {}
        self._mp_memo: dict[tuple[int, int], Any] = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"HalfLineSeq({self.name!r}, start={self.start})"

    def _check_range(self, lo: int, hi: int) -> None:
        if lo < self.start:
            raise DomainError(f"{self.name}: index {lo} below start {self.start}")
        if self.stop is not None and hi > self.stop:
            raise DomainError(f"{self.name}: index {hi} beyond last defined index {self.stop}")

    def _compute_chunk(self, c: int) -> np.ndarray:
        lo = self.start + c * _CHUNK
        hi = lo + _CHUNK
        if self.stop is not None:
            hi = min(hi, self.stop + 1)
        ks = np.arange(lo, hi, dtype=np.int64)
        with np.errstate(all="ignore"):
            arr = np.asarray(self._fn(ks), dtype=np.float64)
        if arr.shape != ks.shape:
            arr = np.broadcast_to(arr, ks.shape).copy()
        arr.setflags(write=False)
        return arr

    def _chunk(self, c: int, cache: bool = True) -> np.ndarray:
        arr = self._chunks.get(c)
        if arr is not None:
            return arr
        if not cache:
            return self._compute_chunk(c)
        with self._lock:
            arr = self._chunks.get(c)
            if arr is None:
                arr = self._compute_chunk(c)
                self._chunks[c] = arr
        return arr

    def values(self, lo: int, hi: int, check_finite: bool = True, cache: bool = True) -> np.ndarray:
        """Return the values on ``[lo, hi]`` (inclusive) as a float64 array.

        With ``cache=False`` missing chunks are computed (in the same aligned
        blocks, hence bit-identically) but not stored.
        """
        if hi < lo:
            return np.empty(0)
        self._check_range(lo, hi)
        c0 = (lo - self.start) // _CHUNK
        c1 = (hi - self.start) // _CHUNK
        parts = [self._chunk(c, cache) for c in range(c0, c1 + 1)]
        out = np.concatenate(parts) if len(parts) > 1 else parts[0]
        off = lo - (self.start + c0 * _CHUNK)
        out = out[off : off + (hi - lo + 1)]
        if check_finite and not np.all(np.isfinite(out)):
            bad = lo + int(np.argmin(np.isfinite(out)))
            raise DomainError(f"{self.name}: non-finite value at k={bad}")
        return out

    def __call__(self, k: int) -> float:
        return float(self.values(k, k)[0])

    def mp(self, k: int) -> Any:
        """Value at ``k`` as an ``mpf`` at the current mpmath precision."""
        self._check_range(k, k)
        key = (k, mpmath.mp.prec)
        val = self._mp_memo.get(key)
        if val is None:
            if self._mp_fn is None:
                val = mpmath.mpf(self(k))
            else:
                val = mpmath.mpf(self._mp_fn(k))
            self._mp_memo[key] = val
        return val

    def mp_values(self, lo: int, hi: int) -> list:
        return [self.mp(k) for k in range(lo, hi + 1)]

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_array(
        cls,
        values: Sequence[float] | np.ndarray,
        start: int,
        name: str = "table",
        tail: Callable[[np.ndarray], np.ndarray] | None = None,
    ) -> HalfLineSeq:
        """Wrap a finite array; indices beyond it use ``tail`` or are undefined."""
        arr = np.asarray(values, dtype=np.float64).copy()
        last = start + len(arr) - 1

        def fn(ks: np.ndarray) -> np.ndarray:
            out = np.empty(ks.shape)
            inside = ks <= last
            out[inside] = arr[ks[inside] - start]
            if np.any(~inside):
                out[~inside] = tail(ks[~inside]) if tail is not None else np.nan
            return out

        return cls(fn, start, name=name, stop=None if tail is not None else last)

    def scaled(self, factor: float, name: str | None = None) -> HalfLineSeq:
        """The sequence ``factor * self`` (same start)."""
        base = self
        mp_fn = None
        if base._mp_fn is not None:
            def mp_fn(k: int) -> Any:
                return mpmath.mpf(factor) * base.mp(k)
        return HalfLineSeq(
            lambda ks: factor * base._eval_raw(ks),
            self.start,
            name=name or f"{factor:g}*{self.name}",
            mp_fn=mp_fn,
            stop=self.stop,
        )

    def _eval_raw(self, ks: np.ndarray) -> np.ndarray:
        lo, hi = int(ks[0]), int(ks[-1])
        if hi - lo + 1 == len(ks):
            return self.values(lo, hi, check_finite=False)
        return np.asarray(self._fn(ks), dtype=np.float64)


# -- expression grammar ------------------------------------------------------

_BINOPS = {
    ast.Add: lambda x, y: x + y,
    ast.Sub: lambda x, y: x - y,
    ast.Mult: lambda x, y: x * y,
    ast.Div: lambda x, y: x / y,
    ast.Pow: lambda x, y: x**y,
}
_FUNCS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "floor")
_CONSTS = {"pi": math.pi, "e": math.e}


class _NumpyNS:
    sin, cos, tan, exp, log, sqrt, abs, floor = (
        np.sin, np.cos, np.tan, np.exp, np.log, np.sqrt, np.abs, np.floor,
    )

    @staticmethod
    def const(v: float) -> float:
        return v


class _MpNS:
    sin, cos, tan, exp, log, sqrt, floor = (
        mpmath.sin, mpmath.cos, mpmath.tan, mpmath.exp, mpmath.log, mpmath.sqrt, mpmath.floor,
    )
    abs = staticmethod(abs)

    @staticmethod
    def const(v: float) -> Any:
        return mpmath.mpf(v)


def _constant_value(name: str, ns: Any) -> Any:
    if ns is _MpNS:
        return mpmath.pi if name == "pi" else mpmath.e
    return _CONSTS[name]


def compile_expression(text: str, variable: str = "k") -> Callable[[Any, Any], Any]:
    """Compile an arithmetic expression in one variable (the index ``k`` by default).

    The grammar is numbers, the variable, ``pi``, ``e``, the operators
    ``+ - * / **``, unary minus and the functions
    ``sin cos tan exp log sqrt abs floor``.  Returns ``f(v, ns)`` where ``ns``
    is the numeric namespace.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from exc

    def build(node: ast.AST) -> Callable[[Any, Any], Any]:
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            v = float(node.value)
            return lambda k, ns: ns.const(v)
        if isinstance(node, ast.Name):
            if node.id == variable:
                return lambda k, ns: k
            if node.id in _CONSTS:
                name = node.id
                return lambda k, ns: _constant_value(name, ns)
            raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            lhs, rhs = build(node.left), build(node.right)
            return lambda k, ns: op(lhs(k, ns), rhs(k, ns))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda k, ns: -inner(k, ns)
            return inner
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            fname = node.func.id
            arg = build(node.args[0])
            return lambda k, ns: getattr(ns, fname)(arg(k, ns))
        raise ExpressionError(f"unsupported construct {type(node).__name__} in {text!r}")

    return build(tree)


# -- families ----------------------------------------------------------------

FAMILY_KINDS = (
    "table",
    "constant",
    "power",
    "exponential",
    "scaled_abs_sin",
    "product_closed_form",
    "custom",
)


@dataclass(frozen=True)
class SeqFamily:
    """A named parametric sequence family.

    ``params`` keys by kind:

    - ``table``: ``values`` (list of reals)
    - ``constant``: ``value``
    - ``power``: ``alpha``, ``shift`` (0), ``scale`` (1) -> ``scale * (k + shift)**alpha``
    - ``exponential``: ``base``, ``scale`` (1), ``coef`` (1), ``shift`` (0)
      -> ``coef * base**(scale * (k + shift))``
    - ``scaled_abs_sin``: ``scale`` -> ``scale * |sin k| / k``
    - ``product_closed_form``: ``difference`` (0 or 1), ``coef`` (1) ->
      ``coef * prod_{j=1}^{k-1} (2j+1)/(2j)`` or its forward difference
    - ``custom``: ``expr`` (string in ``k``)
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __hash__(self) -> int:
        return hash((self.kind, repr(sorted(self.params.items()))))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, data: dict) -> SeqFamily:
        data = dict(data)
        kind = data.pop("kind", None)
        if kind not in FAMILY_KINDS:
            raise InvalidParameterError(f"unknown family kind {kind!r}")
        allowed = _FAMILY_KEYS[kind]
        unknown = set(data) - set(allowed)
        if unknown:
            raise InvalidParameterError(f"unknown keys for {kind}: {sorted(unknown)}")
        return cls(kind, data)

    @classmethod
    def power(cls, alpha: float, shift: float = 0.0, scale: float = 1.0) -> SeqFamily:
        return cls("power", {"alpha": alpha, "shift": shift, "scale": scale})

    @classmethod
    def exponential(cls, base: float, scale: float = 1.0, coef: float = 1.0,
                    shift: float = 0.0) -> SeqFamily:
        return cls("exponential", {"base": base, "scale": scale, "coef": coef, "shift": shift})

    @classmethod
    def constant(cls, value: float) -> SeqFamily:
        return cls("constant", {"value": value})

    @classmethod
    def scaled_abs_sin(cls, scale: float) -> SeqFamily:
        return cls("scaled_abs_sin", {"scale": scale})

    @classmethod
    def custom(cls, expr: str) -> SeqFamily:
        return cls("custom", {"expr": expr})

    @classmethod
    def table(cls, values: Sequence[float]) -> SeqFamily:
        return cls("table", {"values": list(values)})


_FAMILY_KEYS = {
    "table": ("values",),
    "constant": ("value",),
    "power": ("alpha", "shift", "scale"),
    "exponential": ("base", "scale", "coef", "shift"),
    "scaled_abs_sin": ("scale",),
    "product_closed_form": ("difference", "coef"),
    "custom": ("expr",),
}


_GAMMA_HALF_SERIES = (1.0, -1 / 8, 1 / 128, 5 / 1024, -21 / 32768, -399 / 262144, 869 / 4194304)
_EULER_CUTOFF = 128


@functools.lru_cache(maxsize=1)
def _euler_table() -> np.ndarray:
    # exact products, rounded once; index k holds y_k for 1 <= k < cutoff
    out = np.zeros(_EULER_CUTOFF)
    y = Fraction(1)
    for k in range(1, _EULER_CUTOFF):
        out[k] = float(y)
        y *= Fraction(2 * k + 1, 2 * k)
    return out


def _euler_product_values(k: np.ndarray) -> np.ndarray:
    """``prod_{j=1}^{k-1} (2j+1)/(2j) = Γ(k+1/2) / (Γ(3/2) Γ(k))`` to full double accuracy."""
    k = np.asarray(k, dtype=np.int64)
    out = np.empty(k.shape, dtype=np.float64)
    small = k < _EULER_CUTOFF
    out[small] = _euler_table()[k[small]]
    kb = k[~small].astype(np.float64)
    inv = 1.0 / kb
    series = np.zeros_like(kb)
    for c in reversed(_GAMMA_HALF_SERIES):
        series = series * inv + c
    out[~small] = np.sqrt(kb) * series / (0.5 * math.sqrt(math.pi))
    return out


def make_seq(family: SeqFamily, m: int, name: str | None = None) -> HalfLineSeq:
    """Build the lazily evaluated sequence of ``family`` on ``Z_m``."""
    kind, prm = family.kind, family.params
    label = name or kind
    if m < 0:
        raise InvalidParameterError(f"start index must be >= 0, got {m}")

    if kind == "table":
        vals = [float(v) for v in prm.get("values", [])]
        if not vals:
            raise InvalidParameterError("table family needs a non-empty 'values' list")
        seq = HalfLineSeq.from_array(vals, m, name=label)
        seq._mp_fn = lambda k: mpmath.mpf(vals[k - m])
        return seq

    if kind == "constant":
        v = float(prm["value"])
        return HalfLineSeq(lambda ks: np.full(ks.shape, v), m, name=label,
                           mp_fn=lambda k: mpmath.mpf(v))

    if kind == "power":
        alpha = float(prm["alpha"])
        shift = float(prm.get("shift", 0.0))
        scale = float(prm.get("scale", 1.0))
        if m + shift <= 0:
            raise InvalidParameterError(
                f"power family: k + shift = {m + shift:g} <= 0 at the start index"
            )
        return HalfLineSeq(
            lambda ks: scale * (ks + shift) ** alpha,
            m,
            name=label,
            mp_fn=lambda k: mpmath.mpf(scale) * (k + mpmath.mpf(shift)) ** mpmath.mpf(alpha),
        )

    if kind == "exponential":
        base = float(prm["base"])
        scale = float(prm.get("scale", 1.0))
        coef = float(prm.get("coef", 1.0))
        shift = float(prm.get("shift", 0.0))
        if base <= 0:
            raise InvalidParameterError(f"exponential family: base must be > 0, got {base}")
        lb = math.log2(base)
        return HalfLineSeq(
            lambda ks: coef * np.exp2(lb * scale * (ks + shift)),
            m,
            name=label,
            mp_fn=lambda k: mpmath.mpf(coef) * mpmath.mpf(base) ** (mpmath.mpf(scale) * (k + shift)),
        )

    if kind == "scaled_abs_sin":
        scale = float(prm["scale"])
        if m < 1:
            raise InvalidParameterError("scaled_abs_sin family requires start index >= 1")
        return HalfLineSeq(
            lambda ks: scale * np.abs(np.sin(ks.astype(np.float64))) / ks,
            m,
            name=label,
            mp_fn=lambda k: mpmath.mpf(scale) * abs(mpmath.sin(k)) / k,
        )

    if kind == "product_closed_form":
        diff = int(prm.get("difference", 0))
        coef = float(prm.get("coef", 1.0))
        if diff not in (0, 1):
            raise InvalidParameterError("product_closed_form: difference must be 0 or 1")
        if m < 1:
            raise InvalidParameterError("product_closed_form requires start index >= 1")

        def fn(ks: np.ndarray) -> np.ndarray:
            y = _euler_product_values(ks)
            return coef * (y / (2.0 * ks) if diff else y)

        def mp_fn(k: int) -> Any:
            y = mpmath.gamma(k + mpmath.mpf(1) / 2) / (mpmath.gamma(mpmath.mpf(3) / 2) * mpmath.gamma(k))
            return mpmath.mpf(coef) * (y / (2 * k) if diff else y)

        return HalfLineSeq(fn, m, name=label, mp_fn=mp_fn)

    if kind == "custom":
        f = compile_expression(str(prm["expr"]))
        return HalfLineSeq(
            lambda ks: f(ks.astype(np.float64), _NumpyNS),
            m,
            name=label,
            mp_fn=lambda k: f(mpmath.mpf(k), _MpNS),
        )

    raise InvalidParameterError(f"unknown family kind {kind!r}")


# -- log-domain primitives ---------------------------------------------------


def log_product(q: HalfLineSeq, m: int, K: int) -> float:
    """Return ``sum_{k=m}^{K} ln(1 + q_k)``.

    Raises:
        DomainError: if some factor ``1 + q_k`` is not positive.
    """
    if K < m:
        return 0.0
    qv = q.values(m, K)
    bad = np.nonzero(qv <= -1.0)[0]
    if bad.size:
        raise DomainError(f"factor 1 + q_k <= 0 at k={m + int(bad[0])}")
    return math.fsum(np.log1p(qv))


@dataclass
class TailSum:
    """Result of :func:`tail_sum_reciprocal`.

    ``value`` includes the extrapolated tail; ``tail_estimate`` is the part of
    ``value`` that was extrapolated beyond the last summed index.
    """

    value: float
    tail_estimate: float
    converged: bool
    last_index: int
    block_ratio: float
    partial_sums: list[float] = field(default_factory=list)


def block_tail(block_sums: Sequence[float], ratio_max: float = 0.9) -> tuple[float, float, bool]:
    """Geometric extrapolation of a series from its doubled-block sums.

    Returns ``(tail_estimate, ratio, looks_convergent)``; the ratio is taken
    over the last two blocks and a ratio at or above ``ratio_max`` is treated
    as divergence.
    """
    if len(block_sums) < 2:
        return math.inf, math.nan, False
    prev, last = block_sums[-2], block_sums[-1]
    if last == 0.0:
        return 0.0, 0.0, True
    if prev <= 0.0:
        return math.inf, math.inf, False
    rho = last / prev
    if rho >= ratio_max:
        return math.inf, rho, False
    return last * rho / (1.0 - rho), rho, True


def doubling_blocks(k: int, horizon: int, first: int | None = None) -> list[tuple[int, int]]:
    """Blocks ``[b_i, b_{i+1})`` starting at ``k`` whose lengths double.

    Only whole blocks ending at or before ``horizon`` are produced, except that
    at least two blocks are always returned.
    """
    length = first or max(k, 16)
    out = []
    lo = k
    while lo + length - 1 <= horizon or len(out) < 2:
        out.append((lo, lo + length))
        lo += length
        length *= 2
    return out


def tail_sum_reciprocal(
    r: HalfLineSeq,
    k: int,
    horizon: int = 1 << 20,
    tol: float = 1e-12,
    first_block: int | None = None,
) -> TailSum:
    """Approximate ``sum_{j>=k} 1/r_j`` by doubled blocks plus a geometric tail.

    Summation stops as soon as the extrapolated tail drops below ``tol`` or
    the horizon is reached.  ``converged`` is False when the last blocks do not
    shrink geometrically (divergent or too slowly convergent series).

    Raises:
        NonPositiveCoefficientError: if some ``r_j <= 0`` on the summed range.
    """
    total_parts: list[float] = []
    blocks: list[float] = []
    partial: list[float] = []
    estimates: list[float] = []
    tail, rho, ok = math.inf, math.nan, False
    last = k - 1
    for lo, hi in doubling_blocks(k, horizon, first_block):
        vals = r.values(lo, hi - 1, check_finite=False, cache=hi - lo < (1 << 16))
        if np.any(vals <= 0) or np.any(np.isnan(vals)):
            bad = lo + int(np.argmax((vals <= 0) | np.isnan(vals)))
            raise NonPositiveCoefficientError(f"{r.name}: nonpositive value at k={bad}")
        s = math.fsum(1.0 / vals)
        blocks.append(s)
        total_parts.append(s)
        last = hi - 1
        partial.append(math.fsum(total_parts))
        tail, rho, ok = block_tail(blocks)
        if ok and tail <= tol:
            break
        estimates.append(partial[-1] + tail if ok else math.inf)
    head = math.fsum(total_parts)
    if not ok:
        return TailSum(head, math.inf, False, last, rho, partial)
    value = head + tail
    if len(estimates) >= 2 and math.isfinite(estimates[-2]) and rho > 1e-3:
        # power-law terms: geometric extrapolation errs by O(b^-alpha), 2^alpha = 2/rho
        value += (estimates[-1] - estimates[-2]) / (2.0 / rho - 1.0)
        tail = value - head
    return TailSum(value, tail, True, last, rho, partial)


def power_fit(r: HalfLineSeq, M: int) -> tuple[float, float]:
    """Fit ``r_k ~ A (k + s)^alpha`` near ``M``; returns ``(alpha, s)``.

    Uses the logarithmic derivative ``g(x) = alpha / (x + s)`` estimated from
    consecutive values at ``M - 1/2`` and ``M/2 - 1/2``.  Returns NaNs when the
    data are not consistent with a growing power law.
    """
    rm, rm1 = r(M), r(M - 1)
    g1 = math.log(rm / rm1)
    g2 = math.log(r(M // 2) / r(M // 2 - 1))
    x1, x2 = M - 0.5, M // 2 - 0.5
    if not (g1 > 0 and g2 > 0 and (1.0 / g1 - 1.0 / g2) > 0):
        return math.nan, math.nan
    alpha = (x1 - x2) / (1.0 / g1 - 1.0 / g2)
    return alpha, alpha / g1 - x1


def power_tail_reciprocal(r: HalfLineSeq, N: int, alpha_hint: float | None = None) -> float:
    """``sum_{j>=N} 1/r_j`` for eventually power-like ``r ~ A (k + s)^alpha``, alpha > 1.

    Sums ``[N, 4N)`` directly and closes with the midpoint integral of the
    power law fitted at ``4N``.  Relative error is ``O(N^-2)`` for exact
    shifted power laws.
    """
    M = 4 * N
    head = math.fsum(1.0 / r.values(N, M - 1, cache=M - N < (1 << 16)))
    alpha, shift = power_fit(r, M)
    if alpha_hint is not None and not (abs(alpha - alpha_hint) <= 0.05 * abs(alpha_hint)):
        # noisy coefficients: fall back to the window exponent without a shift
        alpha, shift = alpha_hint, 0.0
    if not alpha > 1.0:
        raise DomainError(f"{r.name}: power tail needs alpha > 1, got {alpha:g}")
    x1 = M - 0.5
    return head + (x1 + shift) / ((alpha - 1.0) * math.sqrt(r(M) * r(M - 1)))


def reciprocal_tails(r: HalfLineSeq, lo: int, hi: int, tail_horizon: int | None = None) -> np.ndarray:
    """``T_j = sum_{i>=j} 1/r_i`` for ``j`` in ``[lo, hi]``.

    The remainder beyond ``hi`` comes from :func:`tail_sum_reciprocal`; the
    finite part is a reverse cumulative sum, so small tails keep their
    relative accuracy.
    """
    ts = tail_sum_reciprocal(r, hi + 1, horizon=tail_horizon or max(64 * hi, 1 << 14), tol=0.0)
    inv = 1.0 / r.values(lo, hi)
    return np.cumsum(inv[::-1])[::-1] + ts.value
