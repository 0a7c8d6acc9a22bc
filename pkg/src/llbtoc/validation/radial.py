"""Closed-form solution for spatially constant states without control.

For m = r(t) e with |e| = 1 the equation reduces to r' = -(1 + r^2) r, and
s = r^2 obeys s' = -2 s (1 + s), so s / (1 + s) = a exp(-2t) with a = s0 / (1 + s0).
"""

from __future__ import annotations

import numpy as np


def radial_oracle(s0: float, t):
    """s(t) = a e^{-2t} / (1 - a e^{-2t}), a = s0 / (1 + s0)."""
    if s0 < 0:
        raise ValueError("s0 = |m0|^2 must be non-negative")
    a = s0 / (1.0 + s0)
    e = a * np.exp(-2.0 * np.asarray(t, dtype=float))
    return e / (1.0 - e)


def radial_hit_time(s0: float, s: float) -> float:
    """Inverse map: the time at which s(t) reaches s, for 0 < s <= s0."""
    if not 0.0 < s <= s0:
        raise ValueError(f"s = {s} outside (0, s0 = {s0}]")
    a = s0 / (1.0 + s0)
    return 0.5 * float(np.log(a * (1.0 + s) / s))


def radial_rate(s0: float, t):
    """r'(t) for r = sqrt(s): r' = -(1 + r^2) r."""
    r = np.sqrt(radial_oracle(s0, t))
    return -(1.0 + r * r) * r
