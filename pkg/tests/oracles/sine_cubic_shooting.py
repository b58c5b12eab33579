"""Independent reference values for the sine-cubic problem at c = 1.

Nonlinear shooting in mpmath: the free parameter is ``q_1 = a_1 Φ(Δx_1)``;
the forward recurrence

    x_{k+1} = x_k + Φ^{-1}(q_k / a_k),   q_{k+1} = q_k - b_k x_{k+1}³

runs to ``N`` and the terminal condition ``x_N + q_N T_N = 0`` (with
``T_N = sum_{j>=N} (j+1)^-2 = ψ'(N+1)``) selects the solution tending to zero.
The root is bracketed and bisected.  Running at ``N`` and ``2N`` estimates the
truncation error.

Usage: ``python tests/oracles/sine_cubic_shooting.py [N]`` writes
``tests/data/sine_cubic_oracle.json``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40
K = 400


def shoot(q1: mp.mpf, N: int) -> tuple[mp.mpf, list[mp.mpf]]:
    s = 1 / (4 * mp.sqrt(2))
    x = [mp.mpf(1)]
    q = q1
    for k in range(1, N):
        w = q / (k + 1) ** 2
        if abs(w) >= 1:
            return mp.mpf(-1), x
        x.append(x[-1] + w / mp.sqrt(1 - w * w))
        q = q - s * abs(mp.sin(k)) / k * x[-1] ** 3
    T = mp.polygamma(1, N + 1)
    return x[-1] + q * T, x


def solve(N: int) -> list[mp.mpf]:
    lo, hi = mp.mpf(-4) * (1 - mp.mpf(10) ** -30), mp.mpf(0)
    assert shoot(lo, N)[0] < 0 < shoot(hi, N)[0]
    for _ in range(140):
        mid = (lo + hi) / 2
        if shoot(mid, N)[0] < 0:
            lo = mid
        else:
            hi = mid
    return shoot((lo + hi) / 2, N)[1]


def main() -> None:
    N = int(sys.argv[1]) if len(sys.argv) > 1 else 1600
    x1 = solve(N)
    x2 = solve(2 * N)
    diff = max(abs(x1[i] - x2[i]) for i in range(K))
    out = {
        "problem": "a=(k+1)^2, b=|sin k|/(4 sqrt(2) k), F=u^3, m=1, c=1",
        "method": "mpmath shooting, 40 digits, bisection on q_1",
        "horizon": 2 * N,
        "comparison_horizon": N,
        "truncation_estimate": float(diff),
        "k": list(range(1, K + 1)),
        "x": [mp.nstr(v, 20) for v in x2[:K]],
    }
    path = Path(__file__).resolve().parents[1] / "data" / "sine_cubic_oracle.json"
    path.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {path}; truncation estimate {float(diff):.3e}")


if __name__ == "__main__":
    main()
