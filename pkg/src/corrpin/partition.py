"""Exact finite-volume partition functions, all in log domain.

Three independent routes are provided:

* ``annealed_log_z_bruteforce`` -- vectorized enumeration of all 2^(n-1)
  renewal configurations (the oracle; n <= 24);
* ``annealed_log_z_dp``         -- polynomial dynamic programming over
  occupation patterns, exact for finite-range correlations;
* ``quenched_log_z``            -- the O(n^2) renewal recursion for a
  fixed disorder realization.

Pair interactions follow the convention that the origin is not an
interacting renewal point (pairs start at site 1).  Passing
``origin_interacts=True`` switches to the convention in which the origin
pairs with later points; ``past_log_z`` always uses the latter, with the
supplied past occupying the sites behind the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._backend import dp_scatter
from ._patterns import corr_exponents, pattern_of_past
from .correlations import CorrelationModel
from .logdomain import LogWeight
from .renewal import RenewalLaw

_ENUM_MAX_N = 24
_ENUM_CHUNK = 1 << 20
_DP_MAX_Q = 20


def _check_boundary(boundary: str) -> bool:
    if boundary not in ("pinned", "free"):
        raise ValueError(f"boundary must be 'pinned' or 'free', got {boundary!r}")
    return boundary == "pinned"


def _enum_log_z(
    law: RenewalLaw,
    n: int,
    boundary: str,
    site_energy: np.ndarray,
    pair_energy: np.ndarray | None,
    origin_interacts: bool,
) -> float:
    """Stream all renewal configurations of [1, n] and log-sum their weights.

    site_energy[k-1] is added for each occupied site k; pair_energy[d-1]
    for each occupied pair at distance d (with the origin participating
    when origin_interacts).
    """
    pinned = _check_boundary(boundary)
    total_bits = n - 1 if pinned else n
    logk = law.log_k_masses(n)
    if not pinned:
        with np.errstate(divide="ignore"):
            logtails = np.log(np.array([law.cum_tail(j) for j in range(n + 1)]))
    best, acc = -math.inf, 0.0
    one = np.uint32(1)
    for lo in range(0, 1 << total_bits, _ENUM_CHUNK):
        hi = min(lo + _ENUM_CHUNK, 1 << total_bits)
        b = np.arange(lo, hi, dtype=np.uint32)
        full = (b | np.uint32(1 << (n - 1))) if pinned else b
        w = np.zeros(len(b))
        last = np.zeros(len(b), dtype=np.int64)
        for s in range(1, n + 1):
            occ = ((full >> np.uint32(s - 1)) & one).astype(bool)
            gaps = s - last[occ]
            w[occ] += logk[gaps - 1] + site_energy[s - 1]
            last[occ] = s
        if not pinned:
            w += logtails[n - last]
        if pair_energy is not None:
            pb = ((full << one) | one) if origin_interacts else full
            d_max = n if origin_interacts else n - 1
            for d in range(1, d_max + 1):
                if pair_energy[d - 1] == 0.0:
                    continue
                cnt = np.bitwise_count(pb & (pb >> np.uint32(d)))
                w += pair_energy[d - 1] * cnt
        m = float(w.max())
        if m == -math.inf:
            continue
        if m > best:
            acc = acc * math.exp(best - m) if acc else 0.0
            best = m
        acc += float(np.exp(w - best).sum())
    if best == -math.inf:
        return -math.inf
    return best + math.log(acc)


def annealed_log_z_bruteforce(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    n: int,
    boundary: str = "pinned",
    origin_interacts: bool = False,
) -> LogWeight:
    """log of the disorder-averaged partition function, by exact enumeration.

    Every renewal configuration contributes
    exp((h + beta^2/2) * #contacts + beta^2 * sum of rho over occupied
    pairs) times the product of its gap masses.  Any correlation model is
    accepted (no truncation: lags up to n enter exactly).
    """
    if n < 1:
        raise ValueError("system size must be >= 1")
    if n > _ENUM_MAX_N:
        raise ValueError(
            f"brute-force enumeration covers 2^(n-1) configurations and is "
            f"capped at n = {_ENUM_MAX_N}; got n = {n}. Use annealed_log_z_dp "
            f"or annealed_log_z_bracket for larger systems."
        )
    d_max = n if origin_interacts else max(n - 1, 1)
    site = np.full(n, h + 0.5 * beta * beta)
    pair = beta * beta * model.rho_array(d_max)
    val = _enum_log_z(law, n, boundary, site, pair, origin_interacts)
    return LogWeight(val)


def quenched_log_z_bruteforce(
    law: RenewalLaw,
    omega: np.ndarray,
    beta: float,
    h: float,
    n: int,
    boundary: str = "pinned",
) -> LogWeight:
    """Enumeration oracle for the quenched partition function (n <= 24)."""
    if n > _ENUM_MAX_N:
        raise ValueError(f"enumeration capped at n = {_ENUM_MAX_N}")
    if len(omega) < n:
        raise ValueError("need at least n disorder values")
    site = beta * np.asarray(omega[:n], dtype=np.float64) + h
    return LogWeight(_enum_log_z(law, n, boundary, site, None, False))


# ---------------------------------------------------------------------------
# pattern dynamic programming
# ---------------------------------------------------------------------------


def _pattern_dp(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    n: int,
    boundary: str,
    origin_interacts: bool,
    w_init: int,
) -> float:
    q = model.range_q
    if q is None:
        raise ValueError(
            "the pattern DP requires a finite-range correlation model; "
            "truncate the model or use annealed_log_z_bracket"
        )
    if q > _DP_MAX_Q:
        raise ValueError(f"pattern space 2^q is capped at q = {_DP_MAX_Q}, got q = {q}")
    pinned = _check_boundary(boundary)
    dim = 1 << q
    diag = np.exp(beta * beta * corr_exponents(model.rho_array(q), q)) if q else np.ones(1)
    hfac = h + 0.5 * beta * beta
    logk = law.log_k_masses(n)
    rows = np.zeros((q + 1, dim))
    rows[0, w_init] = 1.0
    scale = np.full(n + 1, -math.inf)  # log scale of each row's max entry
    logtot = np.full(n + 1, -math.inf)  # log of each row's total mass
    scale[0] = 0.0
    logtot[0] = 0.0
    for x in range(1, n + 1):
        window = range(1, min(q, x) + 1)
        cands = [scale[x - l] + logk[l - 1] for l in window]
        tail_log = -math.inf
        if x > q:
            past = logtot[0 : x - q] + logk[q:x][::-1]
            tail_log = float(logsumexp(past))
        m = max([c for c in cands if c > -math.inf] + [tail_log], default=-math.inf)
        if m == -math.inf:
            rows[x % (q + 1)] = 0.0
            continue
        acc = np.zeros(dim)
        for l in window:
            coef = math.exp(scale[x - l] + logk[l - 1] - m)
            if coef == 0.0:
                continue
            set_bit = origin_interacts or (x - l > 0)
            dp_scatter(acc, rows[(x - l) % (q + 1)], coef, l, q, set_bit)
        if tail_log > -math.inf:
            acc[0] += math.exp(tail_log - m)
        acc *= diag
        top = float(acc.max())
        if top == 0.0:
            rows[x % (q + 1)] = 0.0
            continue
        rows[x % (q + 1)] = acc / top
        scale[x] = m + hfac + math.log(top)
        logtot[x] = scale[x] + math.log(float(acc.sum()) / top)
    if pinned:
        return float(logtot[n])
    with np.errstate(divide="ignore"):
        logtails = np.log(np.array([law.cum_tail(n - r) for r in range(n + 1)]))
    return float(logsumexp(logtot + logtails))


def annealed_log_z_dp(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    n: int,
    boundary: str = "pinned",
    origin_interacts: bool = False,
) -> LogWeight:
    """Annealed log Z via dynamic programming over occupation patterns.

    Exact (matches the enumeration oracle to floating-point accuracy) for
    correlation models of finite range q; cost O(n (q 2^q + n)).
    """
    if n < 1:
        raise ValueError("system size must be >= 1")
    return LogWeight(_pattern_dp(law, model, beta, h, n, boundary, origin_interacts, 0))


def past_log_z(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    n: int,
    past: tuple[int, ...],
) -> LogWeight:
    """Annealed log Z with pair interactions extended into a fixed past.

    The past gaps place renewal points behind the origin; the origin
    itself interacts (pairs start at site 0).  For a range-q model only
    the past points within distance q matter, so a finite gap sequence
    determines the value exactly.
    """
    if n < 1:
        raise ValueError("system size must be >= 1")
    q = model.range_q
    if q is None:
        raise ValueError("past_log_z requires a finite-range correlation model")
    w_init = pattern_of_past(past, q)
    return LogWeight(_pattern_dp(law, model, beta, h, n, "pinned", True, w_init))


def annealed_log_z_bracket(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    n: int,
    q: int,
    boundary: str = "pinned",
) -> tuple[LogWeight, LogWeight]:
    """Rigorous bracket for the annealed log Z of an infinite-range model.

    Truncating the correlations at range q perturbs each contact's pair
    energy by at most beta^2 t(q+1), hence log Z by n beta^2 t(q+1) in
    either direction.
    """
    truncated = model.truncate(q)
    center = annealed_log_z_dp(law, truncated, beta, h, n, boundary)
    width = n * beta * beta * model.tail_abs_sum(q + 1)
    return LogWeight(center.log - width), LogWeight(center.log + width)


# ---------------------------------------------------------------------------
# quenched partition functions
# ---------------------------------------------------------------------------

_RESCALE_EVERY = 50


def _quenched_log_z_logdomain(
    law: RenewalLaw, energy: np.ndarray, n: int, boundary: str
) -> float:
    """Single-realization recursion entirely in log domain (any magnitudes)."""
    pinned = _check_boundary(boundary)
    logk = law.log_k_masses(n)
    a = np.full(n + 1, -math.inf)
    a[0] = 0.0
    for m in range(1, n + 1):
        a[m] = energy[m - 1] + logsumexp(a[:m] + logk[m - 1 :: -1])
    if pinned:
        return float(a[n])
    with np.errstate(divide="ignore"):
        logtails = np.log(np.array([law.cum_tail(n - r) for r in range(n + 1)]))
    return float(logsumexp(a + logtails))


def quenched_log_z_batch(
    law: RenewalLaw,
    site_energy: np.ndarray,
    n: int,
    boundary: str = "pinned",
) -> np.ndarray:
    """log Z for a batch of fixed-disorder site energies, shape (R, n).

    Runs the renewal recursion z(k) = e^(energy_k) sum_j z(j) K(k-j)
    simultaneously for all rows, with periodic per-row renormalization so
    that no system size within reach underflows.  Per-site energies must
    stay within +-200 (always true for Gaussian disorder at sane
    parameters); beyond that the exact log-domain path takes over.
    """
    pinned = _check_boundary(boundary)
    site_energy = np.atleast_2d(np.asarray(site_energy, dtype=np.float64))
    reps = site_energy.shape[0]
    if site_energy.shape[1] < n:
        raise ValueError("need site energies for all n sites")
    if np.max(np.abs(site_energy[:, :n])) > 200.0:
        return np.array(
            [
                _quenched_log_z_logdomain(law, site_energy[r, :n], n, boundary)
                for r in range(reps)
            ]
        )
    k = law.k_masses(n)
    krev = k[::-1].copy()
    wfac = np.exp(site_energy[:, :n])
    z = np.zeros((reps, n + 1))
    z[:, 0] = 1.0
    shift = np.zeros(reps)
    for m in range(1, n + 1):
        z[:, m] = wfac[:, m - 1] * (z[:, :m] @ krev[n - m :])
        if m % _RESCALE_EVERY == 0:
            rmax = z[:, : m + 1].max(axis=1)
            fix = rmax > 0
            z[fix, : m + 1] /= rmax[fix, None]
            shift[fix] += np.log(rmax[fix])
    with np.errstate(divide="ignore"):
        if pinned:
            out = np.log(z[:, n]) + shift
        else:
            tails = np.array([law.cum_tail(n - r) for r in range(n + 1)])
            out = np.log(z @ tails) + shift
    # a -inf can be a genuine zero (size unreachable) or an underflow past
    # the common scale anchor; the log-domain recursion settles it exactly
    for r in np.nonzero(out == -math.inf)[0]:
        out[r] = _quenched_log_z_logdomain(law, site_energy[r, :n], n, boundary)
    return out


def quenched_log_z(
    law: RenewalLaw,
    omega: np.ndarray,
    beta: float,
    h: float,
    n: int,
    boundary: str = "pinned",
) -> LogWeight:
    """log Z for one fixed disorder realization (omega_1, ..., omega_n)."""
    if len(omega) < n:
        raise ValueError("need at least n disorder values")
    energy = beta * np.asarray(omega[:n], dtype=np.float64) + h
    return LogWeight(float(quenched_log_z_batch(law, energy[None, :], n, boundary)[0]))


# ---------------------------------------------------------------------------
# batch grid API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogZGrid:
    betas: np.ndarray
    hs: np.ndarray
    n: int
    q: int
    log_z: np.ndarray  # (len(betas), len(hs))
    lower: np.ndarray
    upper: np.ndarray
    boundary: str
    pair_convention: str = "pairs-start-at-site-1"


def log_z_grid(
    law: RenewalLaw,
    model: CorrelationModel,
    betas,
    hs,
    n: int,
    q: int,
    boundary: str = "pinned",
) -> LogZGrid:
    """Annealed log Z over a (beta, h) grid with truncation brackets."""
    betas = np.asarray(list(betas), dtype=np.float64)
    hs = np.asarray(list(hs), dtype=np.float64)
    lz = np.empty((len(betas), len(hs)))
    lo = np.empty_like(lz)
    hi = np.empty_like(lz)
    for i, beta in enumerate(betas):
        for j, h in enumerate(hs):
            a, b = annealed_log_z_bracket(law, model, beta, h, n, q, boundary)
            lz[i, j] = 0.5 * (a.log + b.log)
            lo[i, j] = a.log
            hi[i, j] = b.log
    return LogZGrid(
        betas=betas, hs=hs, n=n, q=q, log_z=lz, lower=lo, upper=hi, boundary=boundary
    )
