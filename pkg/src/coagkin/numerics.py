"""Small numerical helpers: compensated summation and Simpson quadrature."""
from __future__ import annotations

import numpy as np


def kahan_sum(values: np.ndarray) -> float:
    """Compensated (Kahan) sum in ascending index order.

    Used for moment functionals where monotonicity comparisons at the
    1e-9 level must not be polluted by naive accumulation error.
    """
    s = 0.0
    c = 0.0
    for v in np.asarray(values, dtype=float):
        y = v - c
        t = s + y
        c = (t - s) - y
        s = t
    return s


def composite_simpson(t: np.ndarray, y: np.ndarray) -> float:
    """Composite Simpson rule on a (possibly nonuniform) sample grid.

    Pairs of adjacent intervals get the three-point Simpson weights; a
    trailing unpaired interval falls back to the trapezoid rule.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.ndim != 1 or t.shape != y.shape:
        raise ValueError("t and y must be 1-d arrays of equal length")
    n = t.size
    if n < 2:
        return 0.0
    total = 0.0
    i = 0
    while i + 2 <= n - 1:
        total += _simpson_pair(t[i], t[i + 1], t[i + 2], y[i], y[i + 1], y[i + 2])
        i += 2
    if i == n - 2:
        total += 0.5 * (t[i + 1] - t[i]) * (y[i] + y[i + 1])
    return total


def cumulative_simpson(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cumulative integral at every sample index.

    Even indices accumulate exact Simpson pairs; odd indices add a
    trapezoid correction over the final interval (one order lower, which
    is why audits prefer even indices).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    n = t.size
    out = np.zeros(n)
    acc = 0.0
    for m in range(2, n, 2):
        acc += _simpson_pair(t[m - 2], t[m - 1], t[m], y[m - 2], y[m - 1], y[m])
        out[m] = acc
    for m in range(1, n, 2):
        out[m] = out[m - 1] + 0.5 * (t[m] - t[m - 1]) * (y[m] + y[m - 1])
    return out


def _simpson_pair(t0, t1, t2, y0, y1, y2) -> float:
    # Exact for quadratics on nonuniform spacing.
    h0 = t1 - t0
    h1 = t2 - t1
    h = h0 + h1
    if h0 <= 0 or h1 <= 0:
        raise ValueError("sample times must be strictly ascending")
    return (h / 6.0) * (
        (2.0 - h1 / h0) * y0
        + (h * h / (h0 * h1)) * y1
        + (2.0 - h0 / h1) * y2
    )
