"""Oracle for the recessive solution of ``Δ((k+1)² Δx_k) + x_{k+1}/4 = 0``.

The recessive solution has a log-free expansion
``x_k = k^{-1/2} sum_n c_n k^{-n}``; the coefficients are obtained with sympy
by annihilating the residual order by order.  The series seeds two values at
``N`` and ``N+1`` and the recurrence is run backward in 60-digit arithmetic
down to ``k = 1``.  Two seeds (``N`` and ``2N``) bound the error.

Run ``python tests/oracles/euler_reciprocal_series.py`` to regenerate
``tests/data/euler_reciprocal_oracle.json``.
"""

from __future__ import annotations

import json
from pathlib import Path

import mpmath as mp
import sympy as sp

ORDER = 12


def series_coefficients(order: int = ORDER) -> list[sp.Rational]:
    t = sp.symbols("t", positive=True)  # t = 1/k
    cs = sp.symbols(f"c1:{order + 1}")
    coef = [sp.Integer(1), *cs]

    def x(shift):
        # (k + shift)^{-1/2 - n} / k^{-1/2} = t^n (1 + shift t)^{-1/2 - n}
        return sum(coef[n] * t**n * (1 + shift * t) ** (-sp.Rational(1, 2) - n) for n in range(order + 1))

    k = 1 / t
    res = (k + 2) ** 2 * (x(2) - x(1)) - (k + 1) ** 2 * (x(1) - x(0)) + x(1) / 4
    ser = sp.series(sp.expand(res), t, 0, order + 1).removeO()
    values: list = [sp.Integer(1)]
    for n in range(1, order + 1):
        # the order-n coefficient is linear in c_n once c_1..c_{n-1} are known
        eqn = sp.expand(ser.coeff(t, n).subs(dict(zip(cs, values[1:]))))
        values.append(sp.solve(eqn, cs[n - 1])[0])
    return values


def series_value(coef: list, k: int) -> mp.mpf:
    k = mp.mpf(k)
    return k ** mp.mpf(-0.5) * mp.fsum(mp.mpf(sp.Rational(c).p) / mp.mpf(sp.Rational(c).q) / k**n
                                       for n, c in enumerate(coef))


def backward(coef: list, N: int, K: int) -> list[mp.mpf]:
    x = {N + 1: series_value(coef, N + 1), N: series_value(coef, N)}
    for k in range(N - 1, 0, -1):
        # (k+2)²(x_{k+2}-x_{k+1}) - (k+1)²(x_{k+1}-x_k) + x_{k+1}/4 = 0 solved for x_k
        q = (k + 2) ** 2 * (x[k + 2] - x[k + 1]) + x[k + 1] / 4
        x[k] = x[k + 1] - q / (k + 1) ** 2
    return [x[k] / x[1] for k in range(1, K + 1)]


def main(N: int = 4000, K: int = 200) -> None:
    mp.mp.dps = 60
    coef = series_coefficients()
    a = backward(coef, N, K)
    b = backward(coef, 2 * N, K)
    diff = max(abs(u - v) for u, v in zip(a, b))
    out = {
        "equation": "r_k=(k+1)^2, p_k=1/4, m=1; recessive solution normalized x_1=1",
        "method": f"log-free 1/k series to order {ORDER}, backward recurrence at 60 digits",
        "seeds": [N, 2 * N],
        "seed_discrepancy": float(diff),
        "series": [str(c) for c in coef[:4]],
        "x": [mp.nstr(v, 20) for v in b],
    }
    path = Path(__file__).resolve().parents[1] / "data" / "euler_reciprocal_oracle.json"
    path.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {path}; seed discrepancy {float(diff):.2e}; x_2/x_1 = {mp.nstr(b[1], 15)}")


if __name__ == "__main__":
    main()
