"""Truncated transfer (Ruelle-Perron-Frobenius) operators.

The annealed pinning model with range-q correlations reduces to a finite
nonnegative operator on occupation patterns: entry (w -> w') carries
K(l) e^(-F l - offset) e^(beta^2 * sum of rho over the arriving pattern)
for the gap l realizing w' = shift(w, l), and all gaps l > q aggregate
analytically into a tail cell at the all-zero pattern, so no gap cap is
ever imposed on the renewal law.

For full-support laws the operator acts on all 2^q patterns through
strided kernels and is never materialized.  For bounded-support laws the
recurrent pattern class is discovered by reachability closure from the
all-zero pattern followed by restriction to its terminal communicating
class, and a small dense matrix is assembled.

The log Perron root of the truncated operator is the Gurevich pressure
of the truncated potential; a uniform potential-shift argument brackets
the untruncated pressure within beta^2 * t(q+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _backend
from ._backend import log_matvec_left, log_matvec_right
from ._patterns import corr_exponents, shift_pattern
from .correlations import CorrelationModel
from .exceptions import NumericsError
from .logdomain import INFINITE, Infinite
from .renewal import RenewalLaw

_MAX_Q = 20
_MAX_DENSE = 4096
_LOG_SPAN_LIMIT = 600.0


@dataclass(frozen=True)
class PotentialSpec:
    """Parameters of the potential beta^2 G + log K - offset - F * gap.

    ``model`` must have finite range (truncate first); ``pressure_offset``
    is the constant subtracted per step when building the tilted/centered
    potential from the base one.
    """

    law: RenewalLaw
    model: CorrelationModel
    beta: float
    F: float = 0.0
    pressure_offset: float = 0.0

    def __post_init__(self):
        if self.model.range_q is None:
            raise ValueError("PotentialSpec requires a finite-range correlation model")
        if self.model.range_q > _MAX_Q:
            raise ValueError(f"correlation range is capped at q = {_MAX_Q}")
        if self.beta < 0 or self.F < 0:
            raise ValueError("beta and F must be >= 0")

    @property
    def q(self) -> int:
        return self.model.range_q


@dataclass
class TransferOperator:
    """Finite truncation of the transfer operator, ready for iteration."""

    spec: PotentialSpec
    mode: str  # "full" | "dense"
    dim: int
    kt: np.ndarray  # K(l) e^(-F l - offset), l = 1..q
    tail: float  # sum_{l>q} K(l) e^(-F l - offset)
    diag: np.ndarray | None = None  # full mode: arrival factors over 2^q
    states: np.ndarray | None = None  # dense mode: pattern ids
    matrix: np.ndarray | None = None  # dense mode
    gap_targets: np.ndarray | None = None  # dense mode: (dim, q) state index or -1
    log_mode: bool = False
    _log_kt: np.ndarray | None = field(default=None, repr=False)
    _log_tail: float = field(default=-math.inf, repr=False)
    _log_diag: np.ndarray | None = field(default=None, repr=False)
    _log_matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def q(self) -> int:
        return self.spec.q

    def matvec(self, v: np.ndarray, out=None) -> np.ndarray:
        if self.mode == "full":
            return _backend.matvec_right(v, self.diag, self.kt, self.tail, self.q, out)
        return self.matrix @ v

    def rmatvec(self, u: np.ndarray, out=None) -> np.ndarray:
        if self.mode == "full":
            return _backend.matvec_left(u, self.diag, self.kt, self.tail, self.q, out)
        return self.matrix.T @ u

    def log_matvec(self, logv: np.ndarray) -> np.ndarray:
        if self.mode == "full":
            return log_matvec_right(logv, self._log_diag, self._log_kt, self._log_tail, self.q)
        return logsumexp(self._log_matrix + logv[None, :], axis=1)

    def log_rmatvec(self, logu: np.ndarray) -> np.ndarray:
        if self.mode == "full":
            return log_matvec_left(logu, self._log_diag, self._log_kt, self._log_tail, self.q)
        return logsumexp(self._log_matrix + logu[:, None], axis=0)

    def to_dense(self, max_dim: int = _MAX_DENSE) -> np.ndarray:
        """Materialize the matrix (small q only; for inspection and tests)."""
        if self.mode == "dense":
            return self.matrix.copy()
        if self.dim > max_dim:
            raise ValueError(f"refusing to materialize a {self.dim}x{self.dim} matrix")
        mat = np.zeros((self.dim, self.dim))
        for w in range(self.dim):
            for l in range(1, self.q + 1):
                wp = shift_pattern(w, l, self.q)
                mat[w, wp] += self.kt[l - 1] * self.diag[wp]
            mat[w, 0] += self.tail * self.diag[0]
        return mat

    def state_index(self, pattern: int) -> int | None:
        if self.mode == "full":
            return pattern
        hits = np.nonzero(self.states == pattern)[0]
        return int(hits[0]) if len(hits) else None

    def retilt(self, F: float) -> TransferOperator:
        """Same potential at a different tilt, reusing the pattern geometry.

        The arrival factors (and for bounded-support laws the state set and
        transition structure) do not depend on F; only the per-gap masses
        K(l) e^(-F l - offset) and the tail cell change.
        """
        from dataclasses import replace as _replace

        spec = _replace(self.spec, F=F)
        law, q = spec.law, spec.q
        ls = np.arange(1, q + 1)
        with np.errstate(divide="ignore"):
            log_kt = law.log_k_masses(q) - F * ls - spec.pressure_offset
        log_tail = law.log_tilted_tail(F, q) - spec.pressure_offset
        finite_logs = [x for x in log_kt if x > -math.inf]
        if log_tail > -math.inf:
            finite_logs.append(log_tail)
        span = (max(finite_logs) - min(finite_logs)) if finite_logs else 0.0
        needs_log = bool(
            span > _LOG_SPAN_LIMIT
            or (finite_logs and abs(max(finite_logs)) > _LOG_SPAN_LIMIT)
        )
        if needs_log != self.log_mode:
            return build_transfer(spec)
        kt = np.exp(np.maximum(log_kt, -745.0)) * (log_kt > -math.inf)
        tail = math.exp(log_tail) if log_tail > -700 else 0.0
        op = TransferOperator(
            spec=spec,
            mode=self.mode,
            dim=self.dim,
            kt=kt,
            tail=tail,
            diag=self.diag,
            states=self.states,
            gap_targets=self.gap_targets,
            log_mode=self.log_mode,
        )
        if self.mode == "dense":
            dim = self.dim
            matrix = np.zeros((dim, dim))
            log_matrix = np.full((dim, dim), -math.inf)
            with np.errstate(divide="ignore"):
                log_diag = np.log(self.diag)
            for l in range(1, q + 1):
                tgt = self.gap_targets[:, l - 1]
                ok = np.nonzero(tgt >= 0)[0]
                for i in ok:
                    j = tgt[i]
                    matrix[i, j] += kt[l - 1] * self.diag[j]
                    log_matrix[i, j] = np.logaddexp(
                        log_matrix[i, j], log_kt[l - 1] + log_diag[j]
                    )
            j0 = self.state_index(0)
            if j0 is not None and log_tail > -math.inf:
                matrix[:, j0] += tail * self.diag[j0]
                log_matrix[:, j0] = np.logaddexp(
                    log_matrix[:, j0], log_tail + log_diag[j0]
                )
            op.matrix = matrix
            if self.log_mode:
                op._log_matrix = log_matrix
        elif self.log_mode:
            op._log_kt = log_kt
            op._log_tail = log_tail
            op._log_diag = self._log_diag
        return op


def _terminal_class(adj: dict[int, set[int]]) -> set[int]:
    """Terminal strongly connected component of a small digraph."""
    order: list[int] = []
    seen: set[int] = set()
    for root in adj:
        if root in seen:
            continue
        stack = [(root, iter(adj[root]))]
        seen.add(root)
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append((nxt, iter(adj[nxt])))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()
    radj: dict[int, set[int]] = {v: set() for v in adj}
    for v, outs in adj.items():
        for w in outs:
            radj[w].add(v)
    comp: dict[int, int] = {}
    comps: list[set[int]] = []
    for root in reversed(order):
        if root in comp:
            continue
        cid = len(comps)
        members = {root}
        comp[root] = cid
        stack = [root]
        while stack:
            node = stack.pop()
            for prv in radj[node]:
                if prv not in comp:
                    comp[prv] = cid
                    members.add(prv)
                    stack.append(prv)
        comps.append(members)
    terminal = [
        members
        for members in comps
        if all(comp[w] == comp[next(iter(members))] for v in members for w in adj[v])
    ]
    if len(terminal) != 1:
        raise NumericsError(
            f"expected a unique terminal pattern class, found {len(terminal)}"
        )
    return terminal[0]


def build_transfer(spec: PotentialSpec) -> TransferOperator:
    """Assemble the truncated transfer operator for a potential."""
    law, model, beta = spec.law, spec.model, spec.beta
    q = spec.q
    rho = model.rho_array(q) if q else np.zeros(0)
    ls = np.arange(1, q + 1)
    with np.errstate(divide="ignore"):
        log_kt = law.log_k_masses(q) - spec.F * ls - spec.pressure_offset
    log_tail = law.log_tilted_tail(spec.F, q) - spec.pressure_offset
    finite_logs = [x for x in log_kt if x > -math.inf]
    if log_tail > -math.inf:
        finite_logs.append(log_tail)
    span = (max(finite_logs) - min(finite_logs)) if finite_logs else 0.0
    log_mode = bool(
        span > _LOG_SPAN_LIMIT
        or (finite_logs and abs(max(finite_logs)) > _LOG_SPAN_LIMIT)
    )
    tail = math.exp(log_tail) if log_tail > -700 else 0.0

    if law.has_full_support:
        exponents = beta * beta * corr_exponents(rho, q) if q else np.zeros(1)
        op = TransferOperator(
            spec=spec,
            mode="full",
            dim=1 << q,
            kt=np.exp(log_kt),
            tail=tail,
            diag=np.exp(exponents),
            log_mode=log_mode,
        )
        if log_mode:
            op._log_kt = log_kt
            op._log_tail = log_tail
            op._log_diag = exponents
        return op

    # bounded support: explicit closure from the all-zero pattern, then
    # restriction to the terminal (recurrent) class
    support = [l for l in range(1, q + 1) if law.k_mass(l) > 0]
    has_tail = law.cum_tail(q) > 0
    adj: dict[int, set[int]] = {}
    frontier = [0]
    while frontier:
        w = frontier.pop()
        if w in adj:
            continue
        outs = {shift_pattern(w, l, q) for l in support}
        if has_tail:
            outs.add(0)
        adj[w] = outs
        frontier.extend(x for x in outs if x not in adj)
        if len(adj) > _MAX_DENSE:
            raise NumericsError(
                f"pattern closure exceeds {_MAX_DENSE} states; reduce q"
            )
    states = np.array(sorted(_terminal_class(adj)), dtype=np.int64)
    index = {int(w): i for i, w in enumerate(states)}
    dim = len(states)
    kt = np.exp(log_kt)
    pattern_exp = np.array(
        [
            beta * beta * float(np.dot(rho, [(w >> d) & 1 for d in range(q)]))
            for w in states
        ]
    )
    diag_states = np.exp(pattern_exp)
    matrix = np.zeros((dim, dim))
    log_matrix = np.full((dim, dim), -math.inf)
    gap_targets = np.full((dim, q), -1, dtype=np.int64)
    for i, w in enumerate(states):
        for l in support:
            wp = index.get(shift_pattern(int(w), l, q))
            if wp is None:
                continue  # transition leaves the terminal class: transient only
            matrix[i, wp] += kt[l - 1] * diag_states[wp]
            log_matrix[i, wp] = np.logaddexp(
                log_matrix[i, wp], log_kt[l - 1] + pattern_exp[wp]
            )
            gap_targets[i, l - 1] = wp
        if has_tail:
            j0 = index.get(0)
            if j0 is not None:
                matrix[i, j0] += tail * diag_states[j0]
                log_matrix[i, j0] = np.logaddexp(
                    log_matrix[i, j0], log_tail + pattern_exp[j0]
                )
    op = TransferOperator(
        spec=spec,
        mode="dense",
        dim=dim,
        kt=kt,
        tail=tail,
        states=states,
        matrix=matrix,
        gap_targets=gap_targets,
        diag=diag_states,
        log_mode=log_mode,
    )
    if log_mode:
        op._log_matrix = log_matrix
    return op


# ---------------------------------------------------------------------------
# Perron spectral data by power iteration
# ---------------------------------------------------------------------------


@dataclass
class SpectralResult:
    lam: float
    log_lambda: float
    v_right: np.ndarray
    v_left: np.ndarray
    residual: float
    iterations: int
    dim: int

    def gibbs_weights(self) -> np.ndarray:
        """Stationary pattern weights of the induced chain."""
        return self.v_left * self.v_right


def spectral(
    op: TransferOperator,
    tol: float = 5e-15,
    accept: float = 1e-13,
    max_iter: int = 100_000,
    v0: np.ndarray | None = None,
    u0: np.ndarray | None = None,
    value_abs_tol: float | None = None,
) -> SpectralResult:
    """Perron root and positive left/right eigenvectors by power iteration.

    Deterministic given the operator; renormalizes every step, falls back
    to log-domain iteration when the entries span too many orders.  Fails
    with a residual diagnostic if ``accept`` cannot be met.

    With ``value_abs_tol`` set, iteration may stop as soon as log lambda
    is certified within that absolute tolerance by the Collatz-Wielandt
    inclusion (lambda lies between min and max of (Mv)/v for any positive
    v); the returned value is the certified interval midpoint and the
    vectors are then only partially converged.  Used by root solvers that
    need the pressure value, not the eigenvectors.
    """
    if op.log_mode:
        return _spectral_log(op, tol, accept, max_iter)
    dim = op.dim
    v = np.full(dim, 1.0 / dim) if v0 is None else np.maximum(v0, 0) + 1e-300
    u = np.full(dim, 1.0 / dim) if u0 is None else np.maximum(u0, 0) + 1e-300
    v /= v.sum()
    u /= u.sum()
    res_r = res_l = math.inf
    best = math.inf
    stall = 0
    iters = 0
    cw_log = None
    while iters < max_iter:
        iters += 1
        w = op.matvec(v)
        lam_r = float(w.sum())
        if not np.isfinite(lam_r) or lam_r <= 0:
            raise NumericsError("power iteration produced a non-positive iterate")
        res_r = float(np.max(np.abs(w - lam_r * v))) / lam_r
        if value_abs_tol is not None:
            ratios = w / v
            cw_lo, cw_hi = float(ratios.min()), float(ratios.max())
        v = w / lam_r
        x = op.rmatvec(u)
        lam_l = float(x.sum())
        res_l = float(np.max(np.abs(x - lam_l * u))) / lam_l
        if value_abs_tol is not None:
            ratios = x / u
            cw_lo = max(cw_lo, float(ratios.min()))
            cw_hi = min(cw_hi, float(ratios.max()))
        u = x / lam_l
        if res_r <= tol and res_l <= tol:
            break
        if value_abs_tol is not None and cw_lo > 0 and cw_hi >= cw_lo:
            half_width = 0.5 * (math.log(cw_hi) - math.log(cw_lo))
            if half_width <= value_abs_tol:
                cw_log = 0.5 * (math.log(cw_hi) + math.log(cw_lo))
                break
        cur = max(res_r, res_l)
        if cur < best * 0.999:
            best = cur
            stall = 0
        else:
            stall += 1
            if stall > 50 and best <= accept:
                break
    w = op.matvec(v)
    lam = float(np.dot(u, w) / np.dot(u, v))
    res_r = float(np.max(np.abs(w - lam * v))) / lam
    x = op.rmatvec(u)
    res_l = float(np.max(np.abs(x - lam * u))) / lam
    residual = max(res_r, res_l)
    if cw_log is None and residual > accept:
        raise NumericsError(
            f"power iteration failed to converge: residual {residual:.3e} "
            f"after {iters} iterations (dim {dim})"
        )
    log_lambda = cw_log if cw_log is not None else math.log(lam)
    u = u / u.sum()
    v = v / float(np.dot(u, v))
    return SpectralResult(
        lam=math.exp(log_lambda),
        log_lambda=log_lambda,
        v_right=v,
        v_left=u,
        residual=residual,
        iterations=iters,
        dim=dim,
    )


def _spectral_log(op, tol, accept, max_iter) -> SpectralResult:
    dim = op.dim
    logv = np.full(dim, -math.log(dim))
    logu = np.full(dim, -math.log(dim))
    iters = 0
    res_r = res_l = math.inf
    while iters < max_iter:
        iters += 1
        logw = op.log_matvec(logv)
        ll_r = float(logsumexp(logw))
        res_r = float(np.max(np.abs(np.expm1(logw - ll_r - logv))))
        logv = logw - ll_r
        logx = op.log_rmatvec(logu)
        ll_l = float(logsumexp(logx))
        res_l = float(np.max(np.abs(np.expm1(logx - ll_l - logu))))
        logu = logx - ll_l
        if res_r <= tol and res_l <= tol:
            break
    logw = op.log_matvec(logv)
    log_lambda = float(logsumexp(logu + logw) - logsumexp(logu + logv))
    residual = max(
        float(np.max(np.abs(np.expm1(logw - log_lambda - logv)))),
        float(np.max(np.abs(np.expm1(op.log_rmatvec(logu) - log_lambda - logu)))),
    )
    if residual > accept:
        raise NumericsError(
            f"log-domain power iteration failed: residual {residual:.3e} "
            f"after {iters} iterations"
        )
    u = np.exp(logu - logsumexp(logu))
    v = np.exp(logv)
    v /= float(np.dot(u, v))
    lam = math.exp(log_lambda) if abs(log_lambda) < 700 else math.inf
    return SpectralResult(
        lam=lam,
        log_lambda=log_lambda,
        v_right=v,
        v_left=u,
        residual=residual,
        iterations=iters,
        dim=dim,
    )


def induced_row_sums(op: TransferOperator, sr: SpectralResult) -> np.ndarray:
    """Row sums of the induced Markov kernel; 1 up to the eigen residual."""
    return op.matvec(sr.v_right) / (sr.lam * sr.v_right)


# ---------------------------------------------------------------------------
# pressure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PressureEstimate:
    value: float  # log Perron root of the truncated system
    lower: float  # rigorous bracket for the untruncated pressure
    upper: float
    q: int
    beta: float
    F: float
    offset: float
    residual: float
    iterations: int

    def to_json_dict(self) -> dict:
        return {
            "q": self.q,
            "beta": self.beta,
            "F": self.F,
            "offset": self.offset,
            "logLambda": self.value,
            "bracket": [self.lower, self.upper],
            "residual": self.residual,
            "iterations": self.iterations,
        }


def gurevich_pressure(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    F: float,
    q: int,
    offset: float = 0.0,
    v0: np.ndarray | None = None,
    u0: np.ndarray | None = None,
) -> tuple[PressureEstimate, SpectralResult]:
    """Pressure of the tilted potential, with a rigorous truncation bracket.

    The bracket is value +- beta^2 t(q+1): replacing the full correlation
    by its range-q truncation shifts the potential uniformly by at most
    beta^2 t(q+1), and the pressure is monotone under uniform shifts.
    """
    truncated = model.truncate(q)
    spec = PotentialSpec(law=law, model=truncated, beta=beta, F=F, pressure_offset=offset)
    op = build_transfer(spec)
    sr = spectral(op, v0=v0, u0=u0)
    half_width = beta * beta * model.tail_abs_sum(q + 1)
    return (
        PressureEstimate(
            value=sr.log_lambda,
            lower=sr.log_lambda - half_width,
            upper=sr.log_lambda + half_width,
            q=q,
            beta=beta,
            F=F,
            offset=offset,
            residual=sr.residual,
            iterations=sr.iterations,
        ),
        sr,
    )


# ---------------------------------------------------------------------------
# periodic-orbit sums
# ---------------------------------------------------------------------------

_MAX_WORDS = 4_000_000


@dataclass(frozen=True)
class PeriodicOrbitPressure:
    value: float  # (1/n) log of the enumerated periodic-orbit sum
    lower_bound: float  # rigorous lower bound on the pressure
    missing_log_bound: float  # log upper bound on the omitted > gap_cap mass
    n: int
    base_symbol: int
    gap_cap: int
    words: int


def periodic_orbit_pressure(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    F: float,
    n: int,
    a: int,
    gap_cap: int,
    offset: float = 0.0,
) -> PeriodicOrbitPressure:
    """Pressure from length-n periodic gap words pinned to first symbol a.

    Enumerates all words (a, x_1, ..., x_{n-1}) with coordinates <= gap_cap,
    evaluates the potential on exact periodizations, and reports both the
    plain (1/n) log sum and the subadditivity lower bound with constant
    exp(-3 sum_m V_m), using V_m <= 2 beta^2 t(m) for the truncated model.
    """
    if model.range_q is None:
        raise ValueError("periodic-orbit sums need a finite-range model; truncate first")
    if n < 1 or gap_cap < 1:
        raise ValueError("need n >= 1 and gap_cap >= 1")
    if law.k_mass(a) <= 0:
        raise ValueError(f"base symbol {a} has zero mass under the law")
    count = gap_cap ** (n - 1)
    if count > _MAX_WORDS:
        raise ValueError(
            f"enumeration of {gap_cap}^{n - 1} = {count} periodic words exceeds "
            f"the budget of {_MAX_WORDS}; lower n or gap_cap"
        )
    q = model.range_q
    rho_pad = np.zeros(n * gap_cap + q + 2)
    if q:
        rho_pad[1 : q + 1] = model.rho_array(q)
    if n == 1:
        words = np.full((1, 1), a, dtype=np.int64)
    else:
        grids = np.meshgrid(*([np.arange(1, gap_cap + 1)] * (n - 1)), indexing="ij")
        words = np.empty((count, n), dtype=np.int64)
        words[:, 0] = a
        for i, g in enumerate(grids):
            words[:, i + 1] = g.reshape(-1)
    with np.errstate(divide="ignore"):
        logk = law.log_k_masses(max(gap_cap, a))
    logw = logk[words - 1].sum(axis=1) - F * words.sum(axis=1) - n * offset
    bb = beta * beta
    for start in range(n):
        s = words[:, start].copy()
        g = rho_pad[np.minimum(s, q + 1)].copy()
        for j in range(1, n * (q + 1)):
            alive = s <= q
            if not alive.any():
                break
            s = s + words[:, (start + j) % n]
            g += np.where(s <= q, rho_pad[np.minimum(s, q + 1)], 0.0)
        logw += bb * g
    log_zn = float(logsumexp(logw))
    value = log_zn / n
    var_sum = model.truncate(q).n_weighted_abs_sum()
    lower = (log_zn - 6.0 * bb * var_sum) / n
    # words with a coordinate beyond gap_cap, bounded through |G| <= t(1)
    t1 = model.tail_abs_sum(1)
    s_full = law.tilted_sum(F)
    s_cap = float(np.exp(logk - F * np.arange(1, len(logk) + 1))[:gap_cap].sum())
    head = math.log(law.k_mass(a)) - F * a + n * bb * t1 - n * offset
    if n == 1 or s_full <= s_cap:
        missing = -math.inf
    else:
        missing = head + math.log(s_full ** (n - 1) - s_cap ** (n - 1))
    return PeriodicOrbitPressure(
        value=value,
        lower_bound=lower,
        missing_log_bound=missing,
        n=n,
        base_symbol=a,
        gap_cap=gap_cap,
        words=count,
    )


# ---------------------------------------------------------------------------
# Gibbs-measure functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GibbsMarginal:
    masses: np.ndarray  # m([l]) for l = 1..n_max
    tail_constant: float  # m([l]) = tail_constant * K(l) exactly for l > q
    normalization_defect: float
    q: int
    beta: float


def gibbs_gap_marginal(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    q: int,
    n_max: int,
) -> GibbsMarginal:
    """Gap marginal of the Gibbs measure of the induced pattern chain.

    m([l]) is the stationary probability that the next gap equals l; for
    l > q the arrival pattern is all-zero and m([l]) = c K(l) with the
    reported constant c.
    """
    if n_max < q:
        raise ValueError("n_max must be >= q")
    truncated = model.truncate(q)
    spec = PotentialSpec(law=law, model=truncated, beta=beta)
    op = build_transfer(spec)
    sr = spectral(op)
    masses = np.zeros(n_max)
    if op.mode == "full":
        u = (op.diag if q else np.ones(1)) * sr.v_right
        for l in range(1, q + 1):
            group = sr.v_left.reshape(1 << l, -1).sum(axis=0)
            src = u[(1 << (l - 1)) :: (1 << l)]
            masses[l - 1] = op.kt[l - 1] * float(np.dot(group, src)) / sr.lam
        zero_idx = 0
    else:
        for l in range(1, q + 1):
            tgt = op.gap_targets[:, l - 1]
            ok = tgt >= 0
            if not ok.any():
                continue
            masses[l - 1] = (
                op.kt[l - 1]
                * float(np.dot(sr.v_left[ok] * op.diag[tgt[ok]], sr.v_right[tgt[ok]]))
                / sr.lam
            )
        zero_idx = op.state_index(0)
    left_total = float(sr.v_left.sum())  # 1 by normalization
    if zero_idx is None or op.tail == 0.0:
        tail_constant = 0.0
    else:
        tail_constant = float(sr.v_right[zero_idx]) * left_total / sr.lam
    if n_max > q:
        ls = np.arange(q + 1, n_max + 1)
        masses[q:] = tail_constant * law.k_masses(n_max)[q:]
    defect = abs(float(masses.sum()) + tail_constant * law.cum_tail(n_max) - 1.0)
    return GibbsMarginal(
        masses=masses,
        tail_constant=tail_constant,
        normalization_defect=defect,
        q=q,
        beta=beta,
    )


def mean_gap_gibbs(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    q: int,
) -> tuple[float | Infinite, float]:
    """Mean gap under the Gibbs measure, and the contact fraction 1/mean."""
    gm = gibbs_gap_marginal(law, model, beta, q, n_max=max(q, 1))
    head = float(np.dot(np.arange(1, len(gm.masses) + 1), gm.masses))
    if gm.tail_constant == 0.0:
        mean = head
    else:
        tail_moment = law.tail_first_moment(max(q, 1))
        if tail_moment is INFINITE:
            return INFINITE, 0.0
        mean = head + gm.tail_constant * tail_moment
    return mean, 1.0 / mean


def rpf_eigenfunction_limit(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    q: int,
) -> float:
    """Limit value of the Perron eigenfunction along receding patterns.

    In the range-q system the eigenfunction is exactly constant on all
    histories whose nearest occupied site lies beyond q, i.e. its value
    at the all-zero pattern (normalized so the left vector is a
    probability and the pairing is 1).
    """
    truncated = model.truncate(q)
    spec = PotentialSpec(law=law, model=truncated, beta=beta)
    op = build_transfer(spec)
    sr = spectral(op)
    idx = op.state_index(0)
    if idx is None:
        raise ValueError(
            "the all-zero pattern does not recur for this law (bounded support "
            "within the window); the eigenfunction limit is undefined"
        )
    return float(sr.v_right[idx])
