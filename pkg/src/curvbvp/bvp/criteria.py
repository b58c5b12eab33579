"""Sufficient criteria for solvability and the resulting verdicts.

A solution exists when the scaled linearized majorant
``Δ(a_k Δz_k) + sqrt(1+c²) L_c b_k z_{k+1} = 0`` has a positive nonincreasing
solution.  That is certified, in order, by comparison with the Euler-type
equation ``Δ(4λ(k+1)² Δz_k) + λ z_{k+1} = 0``, by a scaled library family,
or (on request) by a direct numeric recessive solution.  Failure of every
route means "not certified", never "unsolvable".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import CannotCertifyError, CurvBVPError, UnboundedRatioError
from ..linrec import LinearEq, SolutionTrace, finite_horizon
from ..sturm import (
    MajorantPair,
    PositivityCertificate,
    certificate_from_trace,
    certify_positive_decreasing,
    is_majorant,
    tail_statement,
    verify_trec,
)
from .library import euler_reciprocal, library_majorants
from .model import BVPSpec, HypothesisReport, LcResult, check_hypotheses, lc_details, linearized_majorant

NO_CRITERION = "no feasible lambda; no library majorant matched"


@dataclass
class Cor1Report:
    """Check of ``a_k >= 4λ(k+1)²`` and ``sqrt(1+c²) L_c b_k <= λ`` on ``[lo, hi]``.

    ``interval`` is the exact feasible set ``[lower, upper]`` of ``λ`` on the
    range (empty when ``lower > upper``).  Margins are the minima of
    ``a_k - 4λ(k+1)²`` and ``λ - sqrt(1+c²) L_c b_k``.
    """

    ok: bool
    lam: float | None
    a_margin: float
    b_margin: float
    lo: int
    hi: int
    interval: tuple[float, float]
    first_violation: int | None = None
    violated: str | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "lambda": self.lam,
            "a_margin": self.a_margin,
            "b_margin": self.b_margin,
            "range": [self.lo, self.hi],
            "interval": list(self.interval),
            "first_violation": self.first_violation,
            "violated": self.violated,
            "reason": self.reason,
        }


def check_cor1(
    spec: BVPSpec,
    lam: float | str = "auto",
    lo: int | None = None,
    hi: int = 100_000,
    *,
    Lc: float | None = None,
) -> Cor1Report:
    """Pointwise check of the Euler-comparison inequalities.

    With ``lam="auto"`` the exact feasible interval is computed and its upper
    end (the largest admissible ``λ``) is reported.
    """
    lo = max(spec.m, 1) if lo is None else lo
    Lc = lc_details(spec.F, spec.c).value if Lc is None else Lc
    ks = np.arange(lo, hi + 1, dtype=np.float64)
    a = spec.a.values(lo, hi)
    w = 4.0 * (ks + 1.0) ** 2
    s = math.sqrt(1.0 + spec.c * spec.c)
    pb = s * Lc * spec.b.values(lo, hi) if math.isfinite(Lc) else np.full(ks.shape, math.inf)
    upper = float(np.min(a / w))
    lower = float(np.max(pb))
    if lam == "auto":
        if not (lower <= upper and upper > 0):
            return Cor1Report(False, None, math.nan, math.nan, lo, hi, (lower, upper),
                              reason="no feasible lambda")
        lam_v = upper
    else:
        lam_v = float(lam)
        if not lam_v > 0:
            return Cor1Report(False, lam_v, math.nan, math.nan, lo, hi, (lower, upper),
                              reason="lambda must be positive")
    da = a - lam_v * w
    db = lam_v - pb
    bad_a, bad_b = da < 0, db < 0
    a_margin, b_margin = float(np.min(da)), float(np.min(db))
    if not (bad_a.any() or bad_b.any()):
        return Cor1Report(True, lam_v, a_margin, b_margin, lo, hi, (lower, upper))
    ia = int(np.argmax(bad_a)) if bad_a.any() else len(ks)
    ib = int(np.argmax(bad_b)) if bad_b.any() else len(ks)
    idx, which = (ia, "a") if ia <= ib else (ib, "b")
    return Cor1Report(False, lam_v, a_margin, b_margin, lo, hi, (lower, upper), lo + idx, which,
                      reason=f"{which}-inequality fails at k={lo + idx}")


@dataclass
class SolvabilityVerdict:
    """Outcome of :func:`solvability_verdict`.

    ``criterion`` is one of ``trivial`` (``b ≡ 0``), ``euler-comparison``,
    ``library-majorant`` or ``numeric-certificate`` and is ``None`` when not
    certified.  A certificate at ``c`` also covers every smaller boundary
    value, recorded in ``valid_for``.
    """

    fingerprint: str
    c: float
    certified: bool
    criterion: str | None
    hypotheses: HypothesisReport
    Lc: LcResult | None
    M: float
    lam: float | None = None
    family: str | None = None
    certificate: PositivityCertificate | None = None
    cor1: Cor1Report | None = None
    reason: str | None = None
    attempts: list[str] = field(default_factory=list)

    @property
    def valid_for(self) -> tuple[float, float] | None:
        return (0.0, self.c) if self.certified else None

    def __bool__(self) -> bool:
        return self.certified

    def to_dict(self) -> dict[str, Any]:
        return {
            "fingerprint": self.fingerprint,
            "c": self.c,
            "certified": self.certified,
            "criterion": self.criterion,
            "lambda": self.lam,
            "family": self.family,
            "L_c": self.Lc.to_dict() if self.Lc else None,
            "M": self.M,
            "valid_for": list(self.valid_for) if self.valid_for else None,
            "hypotheses": self.hypotheses.to_dict(),
            "cor1": self.cor1.to_dict() if self.cor1 else None,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "reason": self.reason,
            "attempts": self.attempts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)


def _json_default(obj: Any) -> Any:
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _euler_certificate(eq: LinearEq, lam: float, hi: int, tol: float,
                       rec_tol: float) -> PositivityCertificate:
    """Transfer positivity from the Euler-type equation at scale ``lam`` to ``eq``."""
    euler = euler_reciprocal(lam)
    cert = certify_positive_decreasing(euler, 1, hi, "majorant-transfer", tol=tol, rec_tol=rec_tol)
    rep = verify_trec(MajorantPair(eq, euler, eq.m, hi), cert.witness, tol, rec_tol=rec_tol)
    if not rep.ok:
        raise CannotCertifyError(f"comparison with {euler.name} failed at k={rep.first_violation}")
    details = {"major": euler.name, "lambda": lam, "trec_margin": rep.margin,
               "major_certificate": cert.details}
    out = certificate_from_trace(eq, rep.recessive.trace, "majorant-transfer", eq.m, hi, details)
    if out is None:
        raise CannotCertifyError("recessive solution is not positive nonincreasing")
    out.tail = tail_statement(eq, rep.recessive)
    return out


def _library_route(eq: LinearEq, check_hi: int, cert_hi: int, tol: float, rec_tol: float,
                   attempts: list[str]) -> tuple[str, float, PositivityCertificate] | None:
    m = eq.m
    for fam in library_majorants():
        if fam.m > m:
            continue
        top = min(check_hi, finite_horizon(fam.equation(), check_hi), finite_horizon(eq, check_hi))
        lower, upper = fam.scale_interval(eq, m, top)
        if not (upper > 0 and lower <= upper * (1.0 + 1e-12)):
            attempts.append(f"{fam.name}: empty scale interval [{lower:.6g}, {upper:.6g}]")
            continue
        lam = min(max(lower, 0.0), upper) or upper
        major = fam.equation(lam)
        chk = is_majorant(MajorantPair(eq, major, m, top), rtol=1e-12)
        if not chk:
            attempts.append(f"{fam.name}: majorant check fails at k={chk.index}")
            continue
        x = fam.witness_trace(cert_hi + 1, lam)
        direct = SolutionTrace(eq, x.values, cert_hi + 1)
        cert = certificate_from_trace(eq, direct, "closed-form-witness", m, cert_hi,
                                      {"witness": fam.name})
        if cert is not None:
            return fam.name, lam, cert
        try:
            rep = verify_trec(MajorantPair(eq, major, m, cert_hi), x, tol, rec_tol=rec_tol)
        except CurvBVPError as exc:
            attempts.append(f"{fam.name}: {exc}")
            continue
        if not rep.ok:
            attempts.append(f"{fam.name}: {rep.violation} check failed at k={rep.first_violation}")
            continue
        cert = certificate_from_trace(eq, rep.recessive.trace, "majorant-transfer", m, cert_hi,
                                      {"major": fam.name, "lambda": lam, "trec_margin": rep.margin})
        if cert is not None:
            cert.tail = tail_statement(eq, rep.recessive)
            return fam.name, lam, cert
        attempts.append(f"{fam.name}: recessive is not positive nonincreasing")
    return None


def solvability_verdict(
    spec: BVPSpec,
    *,
    lam: float | str = "auto",
    check_hi: int = 100_000,
    cert_hi: int = 500,
    horizon: int = 1 << 16,
    numeric: bool = False,
    require_hypotheses: bool = True,
    tol: float = 1e-9,
    rec_tol: float = 1e-10,
) -> SolvabilityVerdict:
    """Try the sufficient criteria in order and return the first success.

    Args:
        spec: The problem.
        lam: ``"auto"`` or a fixed ``λ`` for the Euler comparison.
        check_hi: Last index of the pointwise coefficient checks.
        cert_hi: Last index of the numeric positivity certificate.
        horizon: Horizon of the summability tests.
        numeric: Also try a direct numeric certificate of the linearized
            majorant.  Off by default, because a finite-range certificate
            alone does not establish nonoscillation on the half-line.
        require_hypotheses: Return "not certified" when a hypothesis fails.
        tol: Relative slack of the Riccati comparisons.
        rec_tol: Stabilization tolerance of recessive solutions.
    """
    hyp = check_hypotheses(spec, horizon)
    fp = spec.fingerprint()
    attempts: list[str] = []

    def verdict(**kw: Any) -> SolvabilityVerdict:
        return SolvabilityVerdict(fp, spec.c, hypotheses=hyp, M=spec.M, attempts=attempts, **kw)

    if require_hypotheses and not hyp.ok:
        return verdict(certified=False, criterion=None, Lc=None,
                       reason="hypothesis failed: " + ", ".join(hyp.failed))
    try:
        lc = lc_details(spec.F, spec.c)
    except UnboundedRatioError as exc:
        return verdict(certified=False, criterion=None, Lc=None, reason=str(exc))
    if not math.isfinite(lc.value):
        return verdict(certified=False, criterion=None, Lc=lc, reason="L_c is infinite")

    eq = linearized_majorant(spec, scaled=True, Lc=lc.value)
    if spec.b_vanishes(cert_hi + 1) and spec.b_vanishes(check_hi):
        cert = certify_positive_decreasing(eq, spec.m, cert_hi, "closed-form-witness")
        return verdict(certified=True, criterion="trivial", Lc=lc, certificate=cert)

    cor1 = check_cor1(spec, lam, hi=check_hi, Lc=lc.value) if spec.m >= 1 else None
    if cor1 is not None and cor1.ok:
        try:
            cert = _euler_certificate(eq, cor1.lam, cert_hi, tol, rec_tol)
            return verdict(certified=True, criterion="euler-comparison", Lc=lc, lam=cor1.lam,
                           family="euler", certificate=cert, cor1=cor1)
        except CurvBVPError as exc:
            attempts.append(f"euler-comparison: {exc}")
    else:
        attempts.append("euler-comparison: " + (cor1.reason if cor1 is not None else "needs m >= 1"))

    found = _library_route(eq, check_hi, cert_hi, tol, rec_tol, attempts)
    if found is not None:
        name, lam_f, cert = found
        return verdict(certified=True, criterion="library-majorant", Lc=lc, lam=lam_f,
                       family=name, certificate=cert, cor1=cor1)

    if numeric:
        try:
            cert = certify_positive_decreasing(eq, spec.m, cert_hi, "recessive-numeric",
                                               tol=tol, rec_tol=rec_tol)
            return verdict(certified=True, criterion="numeric-certificate", Lc=lc,
                           certificate=cert, cor1=cor1)
        except CurvBVPError as exc:
            attempts.append(f"numeric: {exc}")

    return verdict(certified=False, criterion=None, Lc=lc, cor1=cor1, reason=NO_CRITERION)
