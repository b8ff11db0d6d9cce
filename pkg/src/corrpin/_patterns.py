"""Occupation-pattern state space shared by the DP and transfer operators.

A pattern is an integer w in [0, 2^q): bit (d-1) is set iff the site at
distance d behind the current renewal point is itself an interacting
renewal point.  Taking a gap of length l maps w to

    shift(w, l) = ((w << l) | 1 << (l-1)) & (2^q - 1)

(the previous point enters the window at distance l; older points recede
by l and drop out beyond q).  Gaps l > q land on the all-zero pattern.
"""

from __future__ import annotations

import numpy as np


def shift_pattern(w: int, l: int, q: int, set_origin: bool = True) -> int:
    mask = (1 << q) - 1
    out = (w << l) & mask
    if set_origin and 1 <= l <= q:
        out |= 1 << (l - 1)
    return out


def pattern_of_past(past, q: int) -> int:
    """Pattern induced at the origin by past gaps (p_0, p_1, ...).

    The past places renewal points at -p_0, -(p_0+p_1), ...; points at
    distance > q are invisible to a range-q potential and are dropped.
    """
    w = 0
    dist = 0
    for gap in past:
        if gap < 1:
            raise ValueError("past gaps must be positive integers")
        dist += int(gap)
        if dist > q:
            break
        w |= 1 << (dist - 1)
    return w


def corr_exponents(rho: np.ndarray, q: int) -> np.ndarray:
    """Vector over all 2^q patterns of sum_d rho_d * bit_d(w)."""
    if len(rho) < q:
        raise ValueError("need rho at lags 1..q")
    out = np.zeros(1 << q)
    for d in range(1, q + 1):
        out.reshape(-1, 1 << d)[:, (1 << (d - 1)) :] += rho[d - 1]
    return out


def pattern_bits(w: int, q: int) -> tuple[int, ...]:
    """Occupied distances of a pattern, smallest first (for reporting)."""
    return tuple(d for d in range(1, q + 1) if w >> (d - 1) & 1)
