"""Compiled inner loops for the three-term recurrence.

Index 0 of every array corresponds to the start index ``m`` of the equation.
The recurrence ``Δ(r_k Δy_k) + p_k y_{k+1} = 0`` is advanced in quasi-difference
form, carrying ``q_k = r_k Δy_k`` alongside ``y``:

    q_{k+1} = q_k - p_k y_{k+1},    y_{k+1} = y_k + q_k / r_k.

This avoids forming ``r_{k+1} + r_k - p_k``, which loses the digits of ``p``
whenever ``p_k`` is small against ``r_k``.
"""

from __future__ import annotations

import numba
import numpy as np

_BIG = 1e200


@numba.njit(cache=True)
def forward(r: np.ndarray, p: np.ndarray, y0: float, y1: float, n: int) -> np.ndarray:
    """Values y_0..y_{n-1}; needs r[0:n-1] and p[0:n-2]."""
    y = np.empty(n)
    y[0] = y0
    if n > 1:
        y[1] = y1
    if n < 3:
        return y
    q = r[0] * (y1 - y0)
    for k in range(n - 2):
        q = q - p[k] * y[k + 1]
        y[k + 2] = y[k + 1] + q / r[k + 1]
    return y


@numba.njit(cache=True)
def backward(r: np.ndarray, p: np.ndarray, g: float) -> np.ndarray:
    """Backward sweep from ``w_N = 1``, ``w_{N+1} = 1 - g``.

    ``g`` is the terminal decrement ``1 - w_{N+1}/w_N``.  ``r`` and ``p`` hold
    indices 0..N; returns w on 0..N+1.  The already computed suffix is
    rescaled whenever magnitudes exceed 1e200, so only the ratios (not the
    absolute size) of the result are meaningful.
    """
    n = r.shape[0] - 1
    w = np.empty(n + 2)
    w[n + 1] = 1.0 - g
    w[n] = 1.0
    q = -r[n] * g
    for k in range(n - 1, -1, -1):
        q = q + p[k] * w[k + 1]
        v = w[k + 1] - q / r[k]
        w[k] = v
        if abs(v) > _BIG:
            q = q / _BIG
            for j in range(k, n + 2):
                w[j] = w[j] / _BIG
    return w


def backward_mp(r: list, p: list, g) -> list:
    """Pure-Python twin of :func:`backward` for ``mpmath`` numbers."""
    n = len(r) - 1
    w = [None] * (n + 2)
    w[n + 1] = 1 - g
    w[n] = g * 0 + 1
    q = -r[n] * g
    for k in range(n - 1, -1, -1):
        q = q + p[k] * w[k + 1]
        w[k] = w[k + 1] - q / r[k]
    return w


def forward_mp(r: list, p: list, y0, y1, n: int) -> list:
    y = [y0, y1][:n]
    if n < 3:
        return y
    q = r[0] * (y1 - y0)
    for k in range(n - 2):
        q = q - p[k] * y[k + 1]
        y.append(y[k + 1] + q / r[k + 1])
    return y
