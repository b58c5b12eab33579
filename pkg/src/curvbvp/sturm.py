"""Sturm majorants, Riccati comparison and positivity certificates.

An equation ``Δ(R_k Δx_k) + P_k x_{k+1} = 0`` is a majorant of
``Δ(r_k Δy_k) + p_k y_{k+1} = 0`` on a range when ``P >= p >= 0`` and
``0 < R <= r`` there.  Nonoscillation and positivity then transfer from the
majorant to the minorant, and the Riccati ratio of the minorant's recessive
solution stays below that of any positive majorant solution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import (
    CannotCertifyError,
    CurvBVPError,
    HypothesisViolatedError,
    PreconditionError,
    UnstableFitError,
)
from .linrec import (
    LinearEq,
    RecessiveReport,
    SolutionTrace,
    generalized_zeros,
    recessive,
    tail_asymptote,
)

STRATEGIES = ("auto", "closed-form-witness", "majorant-transfer", "recessive-numeric")


@dataclass(frozen=True)
class MajorantPair:
    """A candidate majorant relation on the index range ``[lo, hi]``."""

    minor: LinearEq
    major: LinearEq
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.hi < self.lo:
            raise PreconditionError(f"empty range [{self.lo}, {self.hi}]")
        if self.lo < max(self.minor.m, self.major.m):
            raise PreconditionError("range starts before one of the equations is defined")


@dataclass(frozen=True)
class MajorantCheck:
    """Result of :func:`is_majorant`; truthy when the relation holds.

    ``coefficient`` names the first failed inequality: ``"p"`` for
    ``P >= p >= 0`` and ``"r"`` for ``0 < R <= r``.
    """

    ok: bool
    index: int | None = None
    coefficient: str | None = None
    min_p_margin: float = float("nan")
    min_r_margin: float = float("nan")

    def __bool__(self) -> bool:
        return self.ok


def is_majorant(pair: MajorantPair, rtol: float = 0.0) -> MajorantCheck:
    """Check ``P_k >= p_k >= 0`` and ``0 < R_k <= r_k`` on the pair's range.

    ``rtol`` admits relative rounding slack: ``P >= p (1 - rtol)`` and
    ``R <= r (1 + rtol)``.
    """
    lo, hi = pair.lo, pair.hi
    r = pair.minor.r.values(lo, hi)
    p = pair.minor.p.values(lo, hi)
    R = pair.major.r.values(lo, hi)
    P = pair.major.p.values(lo, hi)
    p_bad = (P < p * (1.0 - rtol)) | (p < 0)
    r_bad = (R > r * (1.0 + rtol)) | (R <= 0)
    p_margin = float(np.min(P - p))
    r_margin = float(np.min(r - R))
    if not (p_bad.any() or r_bad.any()):
        return MajorantCheck(True, min_p_margin=p_margin, min_r_margin=r_margin)
    ip = int(np.argmax(p_bad)) if p_bad.any() else len(p)
    ir = int(np.argmax(r_bad)) if r_bad.any() else len(r)
    idx, coef = (ip, "p") if ip <= ir else (ir, "r")
    return MajorantCheck(False, lo + idx, coef, p_margin, r_margin)


@dataclass
class ComparisonReport:
    """Outcome of a Riccati comparison on ``[lo, hi]``; truthy when it passed.

    ``margin`` is the smallest normalized gap ``(upper - lower) / scale`` over
    the checked indices, where ``scale = max(|upper|, |lower|)``.
    """

    ok: bool
    lo: int
    hi: int
    margin: float
    first_violation: int | None = None
    violation: str | None = None
    recessive: RecessiveReport | None = field(default=None, repr=False)
    monotone: bool | None = None

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "range": [self.lo, self.hi],
            "margin": self.margin,
            "first_violation": self.first_violation,
            "violation": self.violation,
            "monotone": self.monotone,
        }


def _riccati_on(eq: LinearEq, trace: SolutionTrace, lo: int, hi: int) -> np.ndarray:
    if trace.m > lo or trace.horizon < hi + 1:
        raise PreconditionError(
            f"trace on [{trace.m}, {trace.horizon}] does not cover [{lo}, {hi + 1}]"
        )
    vals = trace.values[lo - trace.m : hi + 2 - trace.m]
    r = eq.r.values(lo, hi)
    return r * np.diff(vals) / vals[:-1]


def _compare(lower: np.ndarray, upper: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    """Indices where ``lower > upper`` beyond ``tol`` (relative) and the minimum margin."""
    scale = np.maximum(np.abs(lower), np.abs(upper))
    gap = upper - lower
    bad = gap < -tol * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, gap / scale, 0.0)
    return bad, float(np.min(rel)) if rel.size else 0.0


def verify_riccati_comparison(
    pair: MajorantPair, x: SolutionTrace, y: SolutionTrace, tol: float = 1e-9
) -> ComparisonReport:
    """Check the Riccati ordering of a minorant solution over a majorant one.

    With ``x`` a positive solution of the majorant and ``y`` a solution of
    the minorant satisfying ``r_m Δy_m / y_m >= R_m Δx_m / x_m`` at the first
    index, ``y`` stays positive and the ordering persists on the whole range.
    A reported violation therefore indicates a numerical or input error.

    Raises:
        PreconditionError: if ``x`` is not positive, ``y`` does not start
            positive, or the initial ordering fails.
    """
    lo, hi = pair.lo, pair.hi
    xs = x.values[lo - x.m : hi + 2 - x.m]
    if np.any(xs <= 0):
        raise PreconditionError("majorant solution x must be positive on the range")
    if y(lo) <= 0:
        raise PreconditionError("minorant solution must start positive")
    wx = _riccati_on(pair.major, x, lo, hi)
    ys = y.values[lo - y.m : hi + 2 - y.m]
    r = pair.minor.r.values(lo, hi)
    wy = r * np.diff(ys) / ys[:-1]
    bad0, _ = _compare(wx[:1], wy[:1], tol)
    if bad0[0]:
        raise PreconditionError(
            f"initial Riccati ordering fails at k={lo}: {wy[0]!r} < {wx[0]!r}"
        )
    bad, margin = _compare(wx, wy, tol)
    nonpos = ys[1:] <= 0
    first_pos = lo + 1 + int(np.argmax(nonpos)) if nonpos.any() else None
    first_ric = lo + int(np.argmax(bad)) if bad.any() else None
    if first_pos is None and first_ric is None:
        return ComparisonReport(True, lo, hi, margin)
    if first_ric is None or (first_pos is not None and first_pos <= first_ric):
        return ComparisonReport(False, lo, hi, margin, first_pos, "positivity")
    return ComparisonReport(False, lo, hi, margin, first_ric, "riccati")


def verify_trec(
    pair: MajorantPair,
    x: SolutionTrace,
    tol: float = 1e-9,
    *,
    rec_tol: float = 1e-10,
    report: RecessiveReport | None = None,
    **recessive_options: Any,
) -> ComparisonReport:
    """Compare the minorant's recessive solution with a positive majorant solution.

    Computes the recessive ``u`` of the minorant normalized by ``u_lo = x_lo``
    and checks ``r_k Δu_k / u_k <= R_k Δx_k / x_k`` (relative slack ``tol``)
    on the range.  When ``Δx <= 0`` on the range it also checks ``Δu <= 0``.
    A precomputed recessive ``report`` may be passed to skip the solve.

    Raises:
        PreconditionError: if the pair is not a majorant relation or ``x`` is
            not positive on the range.
    """
    lo, hi = pair.lo, pair.hi
    check = is_majorant(pair)
    if not check:
        raise PreconditionError(
            f"not a majorant pair: coefficient {check.coefficient} fails at k={check.index}"
        )
    xs = x.values[lo - x.m : hi + 2 - x.m]
    if np.any(xs <= 0):
        raise PreconditionError("majorant solution x must be positive on the range")
    if pair.minor.m != lo:
        raise PreconditionError("verify_trec needs the range to start at the minorant's m")
    if report is None:
        report = recessive(pair.minor, float(xs[0]), hi + 1, rec_tol, **recessive_options)
    u = report.trace
    wx = _riccati_on(pair.major, x, lo, hi)
    wu = _riccati_on(pair.minor, u, lo, hi)
    bad, margin = _compare(wu, wx, tol)
    x_decreasing = bool(np.all(np.diff(xs) <= 0))
    monotone = None
    first_mono = None
    if x_decreasing:
        du = np.diff(u.values[: hi + 2 - lo])
        mono_bad = du > 0
        monotone = not mono_bad.any()
        if mono_bad.any():
            first_mono = lo + int(np.argmax(mono_bad))
    first_ric = lo + int(np.argmax(bad)) if bad.any() else None
    if first_ric is None and first_mono is None:
        return ComparisonReport(True, lo, hi, margin, recessive=report, monotone=monotone)
    if first_ric is not None and (first_mono is None or first_ric <= first_mono):
        return ComparisonReport(False, lo, hi, margin, first_ric, "riccati", report, monotone)
    return ComparisonReport(False, lo, hi, margin, first_mono, "monotonicity", report, monotone)


@dataclass
class PositivityCertificate:
    """A positive nonincreasing (or decreasing) witness for ``eq`` on ``[lo, hi]``.

    ``method`` is one of ``closed-form-witness``, ``majorant-transfer`` or
    ``recessive-numeric``.  ``claim`` is ``decreasing`` when ``Δ < 0`` holds at
    every index and ``nonincreasing`` otherwise.  ``tail`` records the
    asymptotic statement beyond the range when it could be established.
    """

    eq: LinearEq
    witness: SolutionTrace
    method: str
    lo: int
    hi: int
    min_value: float
    max_delta: float
    claim: str
    details: dict[str, Any] = field(default_factory=dict)
    tail: dict[str, Any] | None = None

    def to_dict(self, witness_csv: str | None = None) -> dict[str, Any]:
        return {
            "equation": self.eq.name,
            "fingerprint": self.eq.fingerprint(),
            "range": [self.lo, self.hi],
            "method": self.method,
            "claim": self.claim,
            "margins": {"min_value": self.min_value, "max_delta": self.max_delta},
            "witness_csv": witness_csv,
            "details": self.details,
            "tail": self.tail,
        }

    def to_json(self, witness_csv: str | None = None) -> str:
        return json.dumps(self.to_dict(witness_csv), indent=2, sort_keys=True)


def certificate_from_trace(
    eq: LinearEq, witness: SolutionTrace, method: str, lo: int, hi: int, details: dict
) -> PositivityCertificate | None:
    vals = witness.values[lo - witness.m : hi + 1 - witness.m]
    if np.any(vals <= 0) or generalized_zeros(witness):
        return None
    dv = np.diff(vals)
    if np.any(dv > 0):
        return None
    if not witness.residual_ok():
        return None
    claim = "decreasing" if np.all(dv < 0) else "nonincreasing"
    return PositivityCertificate(
        eq, witness, method, lo, hi, float(np.min(vals)), float(np.max(dv)), claim, details
    )


def tail_statement(eq: LinearEq, report: RecessiveReport) -> dict[str, Any] | None:
    try:
        d = tail_asymptote(eq, report)
    except (HypothesisViolatedError, UnstableFitError):
        return None
    return {"statement": "u_k ~ d * sum_{j>=k} 1/r_j", "d": float(d)}


def certify_positive_decreasing(
    eq: LinearEq,
    lo: int,
    hi: int,
    strategy: str = "auto",
    *,
    tol: float = 1e-9,
    rec_tol: float = 1e-10,
) -> PositivityCertificate:
    """Certify a positive nonincreasing solution of ``eq`` on ``[lo, hi]``.

    Strategies, tried in this order under ``auto``:

    - ``closed-form-witness``: ``p ≡ 0`` on the range (constant witness) or a
      library witness that solves ``eq`` itself.
    - ``majorant-transfer``: scale a library family into a majorant of ``eq``
      and transfer positivity and monotonicity with :func:`verify_trec`.
    - ``recessive-numeric``: compute the recessive solution directly.

    Raises:
        CannotCertifyError: when the chosen strategies all fail.
    """
    from .bvp.library import library_majorants

    if strategy not in STRATEGIES:
        raise PreconditionError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if lo != eq.m:
        raise PreconditionError("certification range must start at the equation's m")
    order = STRATEGIES[1:] if strategy == "auto" else (strategy,)
    reasons: list[str] = []
    library = library_majorants()

    for strat in order:
        if strat == "closed-form-witness":
            p = eq.p.values(lo, hi + 1)
            if np.all(p == 0):
                w = SolutionTrace(eq, np.ones(hi + 2 - lo), hi + 1)
                cert = certificate_from_trace(eq, w, strat, lo, hi, {"witness": "constant"})
                if cert is not None:
                    return cert
            for fam in library:
                if fam.m > lo:
                    continue
                vals = fam.witness_seq().values(lo, hi + 1)
                w = SolutionTrace(eq, vals, hi + 1)
                cert = certificate_from_trace(eq, w, strat, lo, hi, {"witness": fam.name})
                if cert is not None:
                    return cert
            reasons.append("no closed-form witness solves the equation")

        elif strat == "majorant-transfer":
            for fam in library:
                if fam.m > lo:
                    continue
                lam_lo, lam_hi = fam.scale_interval(eq, lo, hi + 1)
                if not (lam_lo <= lam_hi and lam_hi > 0):
                    continue
                # the smallest admissible scale keeps R as small as possible beyond the range
                lam = lam_lo if lam_lo > 0 else lam_hi
                major = fam.equation(lam)
                pair = MajorantPair(eq, major, lo, hi)
                x = fam.witness_trace(hi + 1, lam)
                try:
                    rep = verify_trec(pair, x, tol, rec_tol=rec_tol)
                except CurvBVPError as exc:
                    reasons.append(f"{fam.name}: {exc}")
                    continue
                if not rep.ok:
                    reasons.append(f"{fam.name}: {rep.violation} check failed at k={rep.first_violation}")
                    continue
                details = {"major": fam.name, "lambda": lam, "trec_margin": rep.margin}
                cert = certificate_from_trace(eq, rep.recessive.trace, strat, lo, hi, details)
                if cert is not None:
                    cert.tail = tail_statement(eq, rep.recessive)
                    return cert
            reasons.append("no library family majorizes the equation")

        elif strat == "recessive-numeric":
            try:
                rep = recessive(eq, 1.0, hi + 1, rec_tol)
            except CurvBVPError as exc:
                reasons.append(f"numeric recessive failed: {exc}")
                continue
            details = {"horizon": rep.horizons_used[-1], "stabilization": rep.stabilization_error}
            cert = certificate_from_trace(eq, rep.trace, strat, lo, hi, details)
            if cert is not None:
                cert.tail = tail_statement(eq, rep)
                return cert
            reasons.append("numeric recessive is not positive nonincreasing")

    raise CannotCertifyError(f"{eq.name}: " + "; ".join(reasons))
