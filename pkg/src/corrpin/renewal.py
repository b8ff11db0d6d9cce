"""Interarrival laws, renewal mass functions, and the homogeneous model.

A recurrent renewal process on the positive integers is specified by its
interarrival mass ``K(n)``.  Four families are supported:

* ``zeta``       -- K(n) = n^-(1+alpha) / zeta(1+alpha), alpha > 0
* ``geometric``  -- K(n) = (1-p) p^(n-1), 0 < p < 1
* ``finite``     -- explicit table on a finite support
* ``log-zeta``   -- K(n) proportional to n^-(1+alpha) / log(n+1)^kappa

Every law exposes exact (to ~1e-14) evaluations of its mass, cumulative
tails ``sum_{l>j} K(l)``, exponentially tilted tails
``sum_{l>j} K(l) e^(-F l)`` and first-moment tails.  For the zeta family
the tilted sums are polylogarithms and are evaluated at extended
precision, which keeps the homogeneous free-energy solver accurate even
when the root is as small as 1e-13.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import mpmath as mp
import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from .exceptions import ConfigError
from .logdomain import INFINITE, Infinite, LogWeight

_MP_DPS = 30
_LOGZETA_PARTIAL = 1 << 16


def _em_tail(f, a: int) -> mp.mpf:
    """sum_{l >= a} f(l) for smooth monotone f, by Euler-Maclaurin."""
    with mp.workdps(_MP_DPS):
        return mp.sumem(f, [a, mp.inf])


@dataclass(frozen=True)
class RenewalLaw:
    """Interarrival law K of a recurrent renewal process.

    Instances are immutable and safe to share across workers; derived
    quantities (normalization constants, cumulative tables) are cached
    on first use.
    """

    kind: str
    alpha: float | None = None
    p: float | None = None
    table: tuple[tuple[int, float], ...] | None = None
    log_power: float | None = None

    def __post_init__(self):
        if self.kind == "zeta":
            if self.alpha is None or self.alpha <= 0:
                raise ConfigError("zeta law requires a tail exponent alpha > 0")
        elif self.kind == "geometric":
            if self.p is None or not 0 < self.p < 1:
                raise ConfigError("geometric law requires p in (0, 1)")
        elif self.kind == "finite":
            if not self.table:
                raise ConfigError("finite-support law requires a nonempty table")
            tab = tuple(sorted((int(n), float(k)) for n, k in self.table))
            if any(n < 1 or k <= 0 for n, k in tab):
                raise ConfigError("finite-support table needs positive gaps and masses")
            total = math.fsum(k for _, k in tab)
            if abs(total - 1.0) > 1e-12:
                raise ConfigError(
                    f"finite-support masses must sum to 1 (recurrent renewal), got {total!r}"
                )
            object.__setattr__(self, "table", tab)
        elif self.kind == "log-zeta":
            if self.alpha is None or self.alpha <= 0:
                raise ConfigError("log-zeta law requires a tail exponent alpha > 0")
            if self.log_power is None or self.log_power <= 0:
                raise ConfigError("log-zeta law requires a log power kappa > 0")
        else:
            raise ConfigError(f"unknown renewal law kind {self.kind!r}")

    # -- structural queries -------------------------------------------------

    @property
    def has_full_support(self) -> bool:
        return self.kind != "finite"

    @property
    def support_max(self) -> int | None:
        """Largest gap with positive mass, or None when unbounded."""
        if self.kind == "finite":
            return self.table[-1][0]
        return None

    @property
    def tail_exponent(self) -> float:
        """alpha such that K(n) ~ L(n) n^-(1+alpha); +inf for light tails."""
        if self.kind in ("zeta", "log-zeta"):
            return float(self.alpha)
        return math.inf

    @cached_property
    def _zeta_norm(self) -> float:
        with mp.workdps(_MP_DPS):
            return float(mp.zeta(1 + self.alpha))

    @cached_property
    def _logzeta_norm(self) -> float:
        # partial sum plus Euler-Maclaurin remainder, cached per law
        n = np.arange(1, _LOGZETA_PARTIAL + 1, dtype=np.float64)
        partial = math.fsum(n ** -(1 + self.alpha) / np.log(n + 1) ** self.log_power)
        a, k = self.alpha, self.log_power
        rem = _em_tail(lambda x: x ** -(1 + a) / mp.log(x + 1) ** k, _LOGZETA_PARTIAL + 1)
        return float(partial + rem)

    @cached_property
    def _table_dict(self) -> dict[int, float]:
        return dict(self.table)

    # -- mass and tails -----------------------------------------------------

    def k_mass(self, n: int) -> float:
        """K(n); exact 0 outside the support."""
        if n < 1:
            raise ValueError(f"gap length must be >= 1, got {n}")
        if self.kind == "zeta":
            return n ** -(1 + self.alpha) / self._zeta_norm
        if self.kind == "geometric":
            return (1 - self.p) * self.p ** (n - 1)
        if self.kind == "finite":
            return self._table_dict.get(n, 0.0)
        return n ** -(1 + self.alpha) / math.log(n + 1) ** self.log_power / self._logzeta_norm

    def k_masses(self, n_max: int) -> np.ndarray:
        """Vector (K(1), ..., K(n_max))."""
        n = np.arange(1, n_max + 1, dtype=np.float64)
        if self.kind == "zeta":
            return n ** -(1 + self.alpha) / self._zeta_norm
        if self.kind == "geometric":
            return (1 - self.p) * self.p ** (n - 1)
        if self.kind == "finite":
            out = np.zeros(n_max)
            for gap, mass in self.table:
                if gap <= n_max:
                    out[gap - 1] = mass
            return out
        return n ** -(1 + self.alpha) / np.log(n + 1) ** self.log_power / self._logzeta_norm

    def log_k_masses(self, n_max: int) -> np.ndarray:
        """log K(1..n_max), evaluated directly in log space (no underflow)."""
        n = np.arange(1, n_max + 1, dtype=np.float64)
        if self.kind == "zeta":
            return -(1 + self.alpha) * np.log(n) - math.log(self._zeta_norm)
        if self.kind == "geometric":
            return math.log1p(-self.p) + (n - 1) * math.log(self.p)
        if self.kind == "finite":
            out = np.full(n_max, -math.inf)
            for gap, mass in self.table:
                if gap <= n_max:
                    out[gap - 1] = math.log(mass)
            return out
        return (
            -(1 + self.alpha) * np.log(n)
            - self.log_power * np.log(np.log(n + 1))
            - math.log(self._logzeta_norm)
        )

    def cum_tail(self, j: int) -> float:
        """sum_{l > j} K(l), exactly (cum_tail(0) == 1)."""
        if j < 0:
            raise ValueError("tail index must be >= 0")
        if j == 0:
            return 1.0
        if self.kind == "zeta":
            return _hurwitz_zeta(1 + self.alpha, j + 1) / self._zeta_norm
        if self.kind == "geometric":
            return self.p**j
        if self.kind == "finite":
            return math.fsum(k for n, k in self.table if n > j)
        return float(self._tilted_tail_mp(0.0, j))

    def tilted_tail(self, tilt: float, j: int) -> float:
        """sum_{l > j} K(l) e^(-tilt*l) with absolute error <= 1e-14."""
        if tilt < 0:
            raise ValueError("tilt must be >= 0")
        if tilt == 0.0:
            return self.cum_tail(j)
        if self.kind == "geometric":
            x = math.exp(-tilt)
            return (1 - self.p) * x ** (j + 1) * self.p**j / (1 - self.p * x)
        if self.kind == "finite":
            return math.fsum(k * math.exp(-tilt * n) for n, k in self.table if n > j)
        return float(self._tilted_tail_mp(tilt, j))

    def tilted_sum(self, tilt: float) -> float:
        """sum_{l >= 1} K(l) e^(-tilt*l)."""
        return self.tilted_tail(tilt, 0)

    def log_tilted_tail(self, tilt: float, j: int) -> float:
        """log of tilted_tail, safe when the tail underflows a double."""
        if tilt == 0.0:
            ct = self.cum_tail(j)
            return math.log(ct) if ct > 0 else -math.inf
        if self.kind == "geometric":
            x = -tilt
            return (
                math.log(1 - self.p)
                + (j + 1) * x
                + j * math.log(self.p)
                - math.log1p(-self.p * math.exp(x))
            )
        if self.kind == "finite":
            terms = [math.log(k) - tilt * n for n, k in self.table if n > j]
            if not terms:
                return -math.inf
            m = max(terms)
            return m + math.log(math.fsum(math.exp(t - m) for t in terms))
        with mp.workdps(_MP_DPS):
            return float(mp.log(self._tilted_tail_mp(tilt, j)))

    def _tilted_tail_mp(self, tilt: float, j: int) -> mp.mpf:
        """Extended-precision tilted tail for the heavy-tailed families."""
        with mp.workdps(_MP_DPS):
            s = mp.mpf(1) + mp.mpf(self.alpha)
            f = mp.mpf(tilt)
            if self.kind == "zeta":
                if tilt * (j + 1) > 20.0:
                    # strongly damped: sum directly (geometric convergence);
                    # the polylog-minus-head route would cancel catastrophically
                    ratio = mp.exp(-f)
                    acc = mp.mpf(0)
                    l = j + 1
                    while True:
                        term = mp.mpf(l) ** -s * mp.exp(-f * l)
                        acc += term
                        if term * ratio / (1 - ratio) < mp.mpf(10) ** (-_MP_DPS) * acc:
                            break
                        l += 1
                    return acc / mp.mpf(self._zeta_norm)
                # mild damping: digits lost to cancellation ~ tilt*(j+1)/ln 10
                with mp.extradps(15):
                    if tilt == 0.0:
                        full = mp.zeta(s)
                    else:
                        full = mp.polylog(s, mp.exp(-mp.mpf(tilt)))
                    head = mp.fsum(
                        mp.exp(-mp.mpf(tilt) * l) * mp.mpf(l) ** -s for l in range(1, j + 1)
                    )
                    return (full - head) / mp.mpf(self._zeta_norm)
            if self.kind == "log-zeta":
                k = mp.mpf(self.log_power)
                kern = lambda x: x**-s / mp.log(x + 1) ** k * mp.exp(-f * x)
                head_n = min(j + 2048, _LOGZETA_PARTIAL)
                head = mp.fsum(kern(l) for l in range(j + 1, head_n + 1))
                return (head + mp.sumem(kern, [head_n + 1, mp.inf])) / mp.mpf(self._logzeta_norm)
            raise AssertionError(self.kind)

    def tail_first_moment(self, j: int) -> float | Infinite:
        """sum_{l > j} l K(l); INFINITE when the tail is too heavy."""
        if self.kind == "zeta":
            if self.alpha <= 1:
                return INFINITE
            return _hurwitz_zeta(self.alpha, j + 1) / self._zeta_norm
        if self.kind == "geometric":
            p = self.p
            return p**j * (j * (1 - p) + 1) / (1 - p)
        if self.kind == "finite":
            return math.fsum(n * k for n, k in self.table if n > j)
        if self.alpha < 1 or (self.alpha == 1 and self.log_power <= 1):
            return INFINITE
        if self.alpha > 1:
            a, k = self.alpha, self.log_power
            n = np.arange(j + 1, _LOGZETA_PARTIAL + 1, dtype=np.float64)
            partial = math.fsum(n**-a / np.log(n + 1) ** k)
            rem = _em_tail(lambda x: x**-a / mp.log(x + 1) ** k, _LOGZETA_PARTIAL + 1)
            return float(partial + rem) / self._logzeta_norm
        # alpha == 1, kappa > 1: integrable log tail
        k = self.log_power
        n = np.arange(j + 1, _LOGZETA_PARTIAL + 1, dtype=np.float64)
        partial = math.fsum(1.0 / n / np.log(n + 1) ** k)
        rem = _em_tail(lambda x: 1 / x / mp.log(x + 1) ** k, _LOGZETA_PARTIAL + 1)
        return float(partial + rem) / self._logzeta_norm

    # -- serialization ------------------------------------------------------

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        if self.kind in ("zeta", "log-zeta"):
            cfg["alpha"] = self.alpha
        if self.kind == "log-zeta":
            cfg["log_power"] = self.log_power
        if self.kind == "geometric":
            cfg["p"] = self.p
        if self.kind == "finite":
            cfg["table"] = {int(n): float(k) for n, k in self.table}
        return cfg


def zeta_law(alpha: float) -> RenewalLaw:
    return RenewalLaw(kind="zeta", alpha=float(alpha))


def geometric_law(p: float) -> RenewalLaw:
    return RenewalLaw(kind="geometric", p=float(p))


def finite_law(table: dict[int, float]) -> RenewalLaw:
    return RenewalLaw(kind="finite", table=tuple(table.items()))


def log_zeta_law(alpha: float, log_power: float) -> RenewalLaw:
    return RenewalLaw(kind="log-zeta", alpha=float(alpha), log_power=float(log_power))


def law_from_config(cfg: dict) -> RenewalLaw:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("law config must be a mapping with a 'kind' field")
    kind = cfg["kind"]
    known = {"kind", "alpha", "p", "table", "log_power"}
    extra = set(cfg) - known
    if extra:
        raise ConfigError(f"unknown law config fields: {sorted(extra)}")
    if kind == "finite":
        if "table" not in cfg:
            raise ConfigError("finite law config requires a 'table' field")
        return finite_law({int(n): float(k) for n, k in cfg["table"].items()})
    return RenewalLaw(
        kind=kind,
        alpha=cfg.get("alpha"),
        p=cfg.get("p"),
        log_power=cfg.get("log_power"),
    )


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def k_mass(law: RenewalLaw, n: int) -> float:
    """Interarrival mass K(n)."""
    return law.k_mass(n)


@dataclass(frozen=True)
class RenewalMassTable:
    """P(n in tau) for n = 0..n_max, from the renewal recursion."""

    law: RenewalLaw
    u: np.ndarray

    def rebuild_defect(self) -> float:
        """Max |u(n) - sum_k K(k) u(n-k)|; 0 when the recursion holds."""
        n_max = len(self.u) - 1
        k = self.law.k_masses(n_max)
        worst = 0.0
        for n in range(1, n_max + 1):
            worst = max(worst, abs(self.u[n] - float(np.dot(k[:n], self.u[n - 1 :: -1]))))
        return worst


def renewal_mass(law: RenewalLaw, n_max: int) -> RenewalMassTable:
    """Renewal mass function u(n) = P(n in tau) via u(n) = sum K(k) u(n-k)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    k = law.k_masses(n_max)
    u = np.zeros(n_max + 1)
    u[0] = 1.0
    for n in range(1, n_max + 1):
        u[n] = np.dot(k[:n], u[n - 1 :: -1])
    return RenewalMassTable(law=law, u=u)


def mean_gap(law: RenewalLaw) -> float | Infinite:
    """Mean interarrival time, or INFINITE."""
    return law.tail_first_moment(0)


def homogeneous_free_energy(law: RenewalLaw, h: float, rtol: float = 1e-12) -> float:
    """Free energy of the homogeneous (disorder-free) pinning model.

    For h > 0 this is the unique root F > 0 of
    ``sum_n K(n) e^(-F n) = e^(-h)``, here solved by bisection on the
    provably valid bracket [0, h]; the series is evaluated through the
    law's analytically tail-bounded tilted sums.  For h <= 0 the model
    is delocalized and F = 0.
    """
    if h <= 0:
        return 0.0
    with mp.workdps(_MP_DPS):
        target = mp.exp(-mp.mpf(h))

        def above(f: float) -> bool:
            # root equation evaluated at extended precision: no cancellation
            if law.kind in ("zeta", "log-zeta"):
                val = law._tilted_tail_mp(f, 0)
            elif law.kind == "geometric":
                x = mp.exp(-mp.mpf(f))
                val = (1 - mp.mpf(law.p)) * x / (1 - mp.mpf(law.p) * x)
            else:
                val = mp.fsum(
                    mp.mpf(k) * mp.exp(-mp.mpf(f) * n) for n, k in law.table
                )
            return val > target

        lo, hi = 0.0, float(h)
        if not above(0.0):  # sum K = 1 <= e^-h cannot happen for h > 0
            raise AssertionError("invalid bracket for homogeneous free energy")
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if above(mid):
                lo = mid
            else:
                hi = mid
            if lo > 0 and hi - lo <= rtol * lo:
                break
        return 0.5 * (lo + hi)


def homogeneous_log_z(law: RenewalLaw, h: float, n: int, boundary: str = "pinned") -> LogWeight:
    """log Z of the homogeneous model at size n, by the scalar renewal recursion.

    Serves as an independent oracle for the disorder-free reductions of
    the annealed solvers.
    """
    if boundary not in ("pinned", "free"):
        raise ValueError(f"boundary must be 'pinned' or 'free', got {boundary!r}")
    if abs(h) > 500:
        raise ValueError("per-contact energy |h| > 500 is outside the supported range")
    k = law.k_masses(n)
    w = math.exp(h)
    z = np.zeros(n + 1)
    z[0] = 1.0
    scale = 0.0
    for m in range(1, n + 1):
        z[m] = w * np.dot(k[:m], z[m - 1 :: -1])
        if z[m] > 1e250 or (0 < z[m] < 1e-250):
            shift = z[m]
            z[: m + 1] /= shift
            scale += math.log(shift)
    if boundary == "pinned":
        val = z[n]
        return LogWeight(math.log(val) + scale if val > 0 else -math.inf)
    tails = np.array([law.cum_tail(n - r) for r in range(n + 1)])
    return LogWeight(math.log(float(np.dot(z, tails))) + scale)
