"""Closed-form Sturm majorants with exact positive decreasing witnesses.

Each entry is a parametric equation ``Δ(λ R̂_k Δx_k) + λ P̂_k x_{k+1} = 0``
together with a witness solution known in closed form.  Scaling by ``λ`` does
not change solutions, so the witness is valid for every ``λ > 0``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ..linrec import LinearEq, SolutionTrace
from ..seq_core import HalfLineSeq, SeqFamily, make_seq


@lru_cache(maxsize=None)
def euler_product(k: int) -> Fraction:
    """``y_k = prod_{j=1}^{k-1} (2j+1)/(2j)`` as an exact rational (``y_1 = 1``)."""
    if k < 1:
        raise ValueError("euler_product is defined for k >= 1")
    if k == 1:
        return Fraction(1)
    return euler_product(k - 1) * Fraction(2 * k - 1, 2 * k - 2)


def euler_product_residuals(n: int) -> list[Fraction]:
    """Residuals of ``Δ²y_k + y_{k+1} / (2(k+1)(2k+1)) = 0`` for ``k = 1..n``."""
    y = euler_product
    return [
        y(k + 2) - 2 * y(k + 1) + y(k) + y(k + 1) / (2 * (k + 1) * (2 * k + 1))
        for k in range(1, n + 1)
    ]


@dataclass(frozen=True)
class LibraryMajorant:
    """A parametric majorant family with an exact witness.

    Attributes:
        name: Short identifier used in reports.
        m: First index on which the family is defined.
        r_family: ``R̂`` as a sequence family (``λ = 1``).
        p_family: ``P̂`` as a sequence family (``λ = 1``).
        witness_family: The witness ``x`` as a sequence family.
        r_exact: ``R̂_k`` as a rational.
        p_exact: ``P̂_k`` as a rational.
        witness_exact: ``x_k`` as a rational.
    """

    name: str
    m: int
    r_family: SeqFamily
    p_family: SeqFamily
    witness_family: SeqFamily
    r_exact: Callable[[int], Fraction]
    p_exact: Callable[[int], Fraction]
    witness_exact: Callable[[int], Fraction]

    def equation(self, lam: float = 1.0) -> LinearEq:
        eq = LinearEq(
            make_seq(self.r_family, self.m, f"R[{self.name}]"),
            make_seq(self.p_family, self.m, f"P[{self.name}]"),
            self.m,
            self.name,
        )
        return eq if lam == 1.0 else eq.scaled(lam, f"{self.name}(lambda={lam:g})")

    def witness_seq(self) -> HalfLineSeq:
        return make_seq(self.witness_family, self.m, f"x[{self.name}]")

    def witness_trace(self, K: int, lam: float = 1.0) -> SolutionTrace:
        """The witness on ``[m, K]`` attached to the equation scaled by ``lam``."""
        return SolutionTrace(self.equation(lam), self.witness_seq().values(self.m, K), K)

    def exact_residuals(self, n: int) -> list[Fraction]:
        """``Δ(R̂_k Δx_k) + P̂_k x_{k+1}`` in rational arithmetic for ``k = m..m+n-1``."""
        x, R, P = self.witness_exact, self.r_exact, self.p_exact
        out = []
        for k in range(self.m, self.m + n):
            q0 = R(k) * (x(k + 1) - x(k))
            q1 = R(k + 1) * (x(k + 2) - x(k + 1))
            out.append(q1 - q0 + P(k) * x(k + 1))
        return out

    def validate(self, n: int = 50) -> bool:
        """True when the witness has exactly zero residual and is positive decreasing."""
        if any(r != 0 for r in self.exact_residuals(n)):
            return False
        xs = [self.witness_exact(k) for k in range(self.m, self.m + n + 1)]
        return all(v > 0 for v in xs) and all(b < a for a, b in zip(xs, xs[1:]))

    def scale_interval(self, eq: LinearEq, lo: int, hi: int) -> tuple[float, float]:
        """Interval of ``λ`` for which ``λ·self`` majorizes ``eq`` on ``[lo, hi]``.

        Needs ``λ R̂ <= r`` and ``λ P̂ >= p``; the interval is empty when the
        first component exceeds the second.
        """
        r = eq.r.values(lo, hi)
        p = eq.p.values(lo, hi)
        rh = make_seq(self.r_family, self.m).values(lo, hi)
        ph = make_seq(self.p_family, self.m).values(lo, hi)
        upper = float(np.min(r / rh))
        lower = float(np.max(p / ph))
        return lower, upper


def _eunew2_witness(k: int) -> Fraction:
    return euler_product(k + 1) - euler_product(k)


EUNEW2 = LibraryMajorant(
    name="eunew2",
    m=1,
    r_family=SeqFamily.custom("2*(k+1)*(2*k+1)"),
    p_family=SeqFamily.constant(1.0),
    witness_family=SeqFamily("product_closed_form", {"difference": 1, "coef": 1.0}),
    r_exact=lambda k: Fraction(2 * (k + 1) * (2 * k + 1)),
    p_exact=lambda k: Fraction(1),
    witness_exact=_eunew2_witness,
)

GEOMETRIC = LibraryMajorant(
    name="geometric",
    m=1,
    r_family=SeqFamily.custom("k*2**(k+1)"),
    p_family=SeqFamily.exponential(2.0, 1.0, 2.0),
    witness_family=SeqFamily.exponential(2.0, -1.0),
    r_exact=lambda k: Fraction(k * 2 ** (k + 1)),
    p_exact=lambda k: Fraction(2 ** (k + 1)),
    witness_exact=lambda k: Fraction(1, 2**k),
)

CUBIC = LibraryMajorant(
    name="cubic",
    m=1,
    r_family=SeqFamily.power(3.0),
    p_family=SeqFamily.custom("(k*k+3*k+1)/(k+2)"),
    witness_family=SeqFamily.power(-1.0),
    r_exact=lambda k: Fraction(k**3),
    p_exact=lambda k: Fraction(k * k + 3 * k + 1, k + 2),
    witness_exact=lambda k: Fraction(1, k),
)


def library_majorants(validate: bool = True) -> list[LibraryMajorant]:
    """The built-in families, each checked for an exactly zero witness residual.

    Raises:
        AssertionError: if a registered witness fails its exact check.
    """
    families = [EUNEW2, GEOMETRIC, CUBIC]
    if validate:
        for fam in families:
            if not fam.validate(50):
                raise AssertionError(f"library witness {fam.name} failed its exact check")
    return families


def euler_reciprocal(lam: float = 0.25) -> LinearEq:
    """``Δ(4λ(k+1)² Δx_k) + λ x_{k+1} = 0`` on ``k >= 1``; ``λ = 1/4`` is the plain form."""
    r = make_seq(SeqFamily.power(2.0, 1.0, 4.0 * lam), 1, "4lam(k+1)^2")
    p = make_seq(SeqFamily.constant(lam), 1, "lam")
    return LinearEq(r, p, 1, "EuR" if lam == 0.25 else f"EuR(lambda={lam:g})")
