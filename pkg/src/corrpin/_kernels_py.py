"""Pure-numpy kernels for the pattern-space hot loops.

Same contracts as the compiled versions in ``_kernels_cy``; selected at
import time by ``corrpin._backend``.  The gap-l transition map

    w -> ((w << l) | 1 << (l-1)) & (2^q - 1)

is affine in (w mod 2^(q-l)), so both directions of the transfer-operator
action reduce to strided reshapes: no index arrays are materialized.
"""

from __future__ import annotations

import numpy as np


def matvec_right(v, diag, kt, tail, q, out=None):
    """(M v)(w) = sum_l kt[l-1] (diag*v)(shift_l(w)) + tail (diag*v)(0).

    M[w, w'] = kt[l-1] * diag[w'] for w' = shift_l(w), with all gaps
    l > q aggregated into the tail cell at the all-zero pattern.
    """
    u = diag * v
    if out is None:
        out = np.empty_like(u)
    out[:] = tail * u[0]
    for l in range(1, q + 1):
        src = u[(1 << (l - 1)) :: (1 << l)]
        out.reshape(1 << l, -1)[:] += kt[l - 1] * src[None, :]
    return out


def matvec_left(u, diag, kt, tail, q, out=None):
    """(M^T u)(w') = diag[w'] * (sum over preimages of w' of kt * u + tail)."""
    if out is None:
        out = np.empty_like(u)
    out[:] = 0.0
    out[0] = tail * u.sum()
    for l in range(1, q + 1):
        group = u.reshape(1 << l, -1).sum(axis=0)
        out[(1 << (l - 1)) :: (1 << l)] += kt[l - 1] * group
    out *= diag
    return out


def dp_scatter(out, src, coef, l, q, set_bit):
    """Accumulate coef * (gap-l image of src) into out.

    With ``set_bit`` the image of pattern w is shift_l(w); without it the
    arriving point's own bit is suppressed (used for the first step of
    partition functions whose pair interactions exclude the origin).
    """
    group = src.reshape(1 << l, -1).sum(axis=0)
    base = (1 << (l - 1)) if set_bit else 0
    out[base :: (1 << l)] += coef * group
    return out


def log_matvec_right(logv, logdiag, logkt, logtail, q, out=None):
    """Log-domain right action, for potentials spanning too many orders."""
    u = logdiag + logv
    if out is None:
        out = np.empty_like(u)
    out[:] = logtail + u[0]
    for l in range(1, q + 1):
        src = u[(1 << (l - 1)) :: (1 << l)]
        view = out.reshape(1 << l, -1)
        np.logaddexp(view, logkt[l - 1] + src[None, :], out=view)
    return out


def log_matvec_left(logu, logdiag, logkt, logtail, q, out=None):
    from scipy.special import logsumexp

    if out is None:
        out = np.empty_like(logu)
    out[:] = -np.inf
    out[0] = logtail + logsumexp(logu)
    for l in range(1, q + 1):
        group = logsumexp(logu.reshape(1 << l, -1), axis=0)
        tgt = out[(1 << (l - 1)) :: (1 << l)]
        np.logaddexp(tgt, logkt[l - 1] + group, out=tgt)
    out += logdiag
    return out
