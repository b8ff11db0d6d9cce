"""Disorder correlation sequences and stationary Gaussian sampling.

A ``CorrelationModel`` describes the covariances rho_n = Cov(omega_0,
omega_n) of a unit-variance stationary sequence, for lags n >= 1 (rho_0
= 1 is implicit).  Supported kinds:

* ``zero``         -- i.i.d. disorder, rho_n = 0
* ``finite``       -- explicit table on finitely many lags
* ``exponential``  -- rho_n = C * decay^n, decay in (0, 1)
* ``power``        -- rho_n = sigma * n^-s, s > 2

Tail functionals (``sum_{k>=n} |rho_k|`` and its partial sums) are in
closed form.  Sampling uses circulant embedding, which is exact in
distribution whenever the embedding spectrum is nonnegative; tiny
negative eigenvalues are clipped and the clipped mass is reported.

Models with negative or even non-realizable covariances are accepted by
every deterministic computation (the annealed formulas are well defined
for any summable sequence); only ``sample_gaussian`` insists on positive
semidefiniteness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from .exceptions import ConfigError, NumericsError

_CLIP_EIGENVALUE = 1e-12
_FATAL_EIGENVALUE = 1e-8
_MAX_EMBED = 1 << 26


@dataclass(frozen=True)
class CorrelationModel:
    kind: str
    C: float | None = None
    decay: float | None = None
    sigma: float | None = None
    s: float | None = None
    table: tuple[tuple[int, float], ...] | None = None

    def __post_init__(self):
        if self.kind == "zero":
            pass
        elif self.kind == "finite":
            tab = tuple(sorted((int(n), float(v)) for n, v in (self.table or ())))
            if any(n < 1 for n, _ in tab):
                raise ConfigError("finite-range table lags must be >= 1")
            tab = tuple((n, v) for n, v in tab if v != 0.0)
            object.__setattr__(self, "table", tab)
        elif self.kind == "exponential":
            if self.C is None or self.C <= 0:
                raise ConfigError("exponential correlations require C > 0")
            if self.decay is None or not 0 < self.decay < 1:
                raise ConfigError("exponential correlations require decay in (0, 1)")
        elif self.kind == "power":
            if self.sigma is None:
                raise ConfigError("power correlations require a scale sigma")
            if self.s is None or self.s <= 2:
                raise ConfigError("power correlations require an exponent s > 2")
        else:
            raise ConfigError(f"unknown correlation kind {self.kind!r}")

    # -- summability flags --------------------------------------------------

    @property
    def abs_summable(self) -> bool:
        return True  # every supported kind has sum |rho_n|  < inf

    @property
    def n_weighted_summable(self) -> bool:
        return True  # s > 2 for the power kind guarantees sum n|rho_n| < inf

    @property
    def exponential_decay(self) -> bool:
        return self.kind in ("zero", "finite", "exponential")

    @property
    def range_q(self) -> int | None:
        """Largest lag with a nonzero covariance; None when infinite."""
        if self.kind == "zero":
            return 0
        if self.kind == "finite":
            return self.table[-1][0] if self.table else 0
        return None

    @cached_property
    def _table_dict(self) -> dict[int, float]:
        return dict(self.table or ())

    # -- values and tails ---------------------------------------------------

    def rho(self, n: int) -> float:
        if n < 1:
            raise ValueError("lag must be >= 1 (rho_0 = 1 is implicit)")
        if self.kind == "zero":
            return 0.0
        if self.kind == "finite":
            return self._table_dict.get(n, 0.0)
        if self.kind == "exponential":
            return self.C * self.decay**n
        return self.sigma * float(n) ** -self.s

    def rho_array(self, n_max: int) -> np.ndarray:
        """(rho_1, ..., rho_n_max)."""
        if self.kind == "zero":
            return np.zeros(n_max)
        if self.kind == "finite":
            out = np.zeros(n_max)
            for lag, v in self.table:
                if lag <= n_max:
                    out[lag - 1] = v
            return out
        n = np.arange(1, n_max + 1, dtype=np.float64)
        if self.kind == "exponential":
            return self.C * self.decay**n
        return self.sigma * n**-self.s

    def tail_abs_sum(self, n: int) -> float:
        """t(n) = sum_{k >= n} |rho_k|, error <= 1e-14."""
        if n < 1:
            raise ValueError("tail index must be >= 1")
        if self.kind == "zero":
            return 0.0
        if self.kind == "finite":
            return math.fsum(abs(v) for lag, v in self.table if lag >= n)
        if self.kind == "exponential":
            return self.C * self.decay**n / (1 - self.decay)
        return abs(self.sigma) * _hurwitz_zeta(self.s, n)

    def delta_correction(self, n: int) -> float:
        """Delta_n = sum_{k=1}^n t(k), the superadditivity defect scale."""
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0 or self.kind == "zero":
            return 0.0
        if self.kind == "finite":
            return math.fsum(min(lag, n) * abs(v) for lag, v in self.table)
        if self.kind == "exponential":
            r = self.decay
            return self.C * (r - r ** (n + 1)) / (1 - r) ** 2
        head = np.arange(1, n + 1, dtype=np.float64)
        return abs(self.sigma) * (
            math.fsum(head ** (1 - self.s)) + n * _hurwitz_zeta(self.s, n + 1)
        )

    def n_weighted_abs_sum(self) -> float:
        """sum_{n >= 1} n |rho_n| (the limit of delta_correction)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "finite":
            return math.fsum(lag * abs(v) for lag, v in self.table)
        if self.kind == "exponential":
            r = self.decay
            return self.C * r / (1 - r) ** 2
        return abs(self.sigma) * _hurwitz_zeta(self.s - 1, 1)

    def truncate(self, q: int) -> CorrelationModel:
        """Finite-range model agreeing on lags 1..q and vanishing beyond."""
        if q < 0:
            raise ValueError("truncation range must be >= 0")
        if q == 0:
            return zero_model()
        rq = self.range_q
        if rq is not None and rq <= q:
            return self
        vals = self.rho_array(q)
        return finite_model({d + 1: float(vals[d]) for d in range(q) if vals[d] != 0.0})

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        if self.kind == "exponential":
            cfg["C"] = self.C
            cfg["rho"] = self.decay
        elif self.kind == "power":
            cfg["sigma"] = self.sigma
            cfg["s"] = self.s
        elif self.kind == "finite":
            cfg["table"] = {int(n): float(v) for n, v in self.table}
        return cfg


def zero_model() -> CorrelationModel:
    return CorrelationModel(kind="zero")


def finite_model(table: dict[int, float]) -> CorrelationModel:
    return CorrelationModel(kind="finite", table=tuple(table.items()))


def exponential_model(C: float, decay: float) -> CorrelationModel:
    return CorrelationModel(kind="exponential", C=float(C), decay=float(decay))


def power_model(sigma: float, s: float) -> CorrelationModel:
    return CorrelationModel(kind="power", sigma=float(sigma), s=float(s))


def model_from_config(cfg: dict) -> CorrelationModel:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("correlation config must be a mapping with a 'kind' field")
    kind = cfg["kind"]
    known = {"kind", "C", "rho", "sigma", "s", "table"}
    extra = set(cfg) - known
    if extra:
        raise ConfigError(f"unknown correlation config fields: {sorted(extra)}")
    if kind == "zero":
        return zero_model()
    if kind == "finite":
        if "table" not in cfg:
            raise ConfigError("finite correlation config requires a 'table' field")
        return finite_model({int(n): float(v) for n, v in cfg["table"].items()})
    if kind == "exponential":
        return exponential_model(cfg.get("C", 1.0), cfg.get("rho", 0.5))
    if kind == "power":
        return power_model(cfg.get("sigma", 1.0), cfg.get("s", 3.0))
    raise ConfigError(f"unknown correlation kind {kind!r}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def rho(model: CorrelationModel, n: int) -> float:
    return model.rho(n)


def tail_abs_sum(model: CorrelationModel, n: int) -> float:
    return model.tail_abs_sum(n)


def delta_correction(model: CorrelationModel, n: int) -> float:
    return model.delta_correction(n)


def truncate(model: CorrelationModel, q: int) -> CorrelationModel:
    return model.truncate(q)


@dataclass(frozen=True)
class CovarianceCheck:
    ok: bool
    failed_minor: int | None = None

    def __bool__(self):
        return self.ok


def validate_covariance(model: CorrelationModel, n: int, tol: float = 1e-12) -> CovarianceCheck:
    """Check positive semidefiniteness of the n x n Toeplitz matrix [rho_|i-j|].

    Runs the Levinson recursion, the Toeplitz form of a pivot-ordered
    factorization: the k-th prediction-error variance is positive iff the
    k-th leading principal minor is.  On failure reports the size of the
    first offending minor.
    """
    if n < 1:
        raise ValueError("matrix size must be >= 1")
    if n == 1:
        return CovarianceCheck(ok=True)
    r = np.concatenate(([1.0], model.rho_array(n - 1)))
    a = np.zeros(n)
    err = 1.0
    for k in range(1, n):
        kappa = (r[k] - np.dot(a[1:k], r[k - 1 : 0 : -1])) / err
        a[1:k] = a[1:k] - kappa * a[k - 1 : 0 : -1]
        a[k] = kappa
        err *= 1 - kappa * kappa
        if err < -tol or abs(kappa) > 1 + tol:
            return CovarianceCheck(ok=False, failed_minor=k + 1)
        if err <= tol:
            break  # singular but PSD; all later minors vanish
    return CovarianceCheck(ok=True)


@dataclass(frozen=True)
class SampleInfo:
    seed: int
    embed_size: int
    clip_mass: float


def sample_gaussian(
    model: CorrelationModel, n: int, seed: int | np.random.SeedSequence
) -> tuple[np.ndarray, SampleInfo]:
    """Sample (omega_1, ..., omega_n) from the stationary Gaussian model.

    Uses circulant embedding with the true covariance extension; the
    embedding is doubled until its spectrum is >= -1e-12 (relative),
    smaller negatives are clipped to zero with the clipped mass recorded
    in the returned metadata.  Output is reproducible bit-for-bit for a
    fixed (model, n, seed).
    """
    if n < 1:
        raise ValueError("sample length must be >= 1")
    check_n = min(n, max(64, 4 * (model.range_q or 0)))
    check = validate_covariance(model, check_n)
    if not check.ok:
        raise NumericsError(
            f"covariance model is not positive semidefinite: "
            f"leading minor of size {check.failed_minor} is negative"
        )
    m = 1 << max(2, math.ceil(math.log2(2 * max(n - 1, 1))))
    while True:
        j = np.arange(m)
        lags = np.minimum(j, m - j)
        c = np.empty(m)
        c[0] = 1.0
        c[1:] = _rho_at(model, lags[1:])
        eig = np.fft.fft(c).real
        scale = eig.max()
        if eig.min() >= -_CLIP_EIGENVALUE * scale:
            break
        if m >= _MAX_EMBED:
            if eig.min() < -_FATAL_EIGENVALUE * scale:
                raise NumericsError(
                    f"circulant embedding spectrum significantly negative "
                    f"(min {eig.min():.3e} at size {m}); model cannot be "
                    f"sampled exactly"
                )
            break
        m *= 2
    neg = eig < 0
    clip_mass = float(max(0.0, -eig[neg].sum() / m))
    eig[neg] = 0.0
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
        seed_echo = int(ss.entropy) if isinstance(ss.entropy, int) else -1
    else:
        ss = np.random.SeedSequence(seed)
        seed_echo = int(seed)
    rng = np.random.default_rng(ss)
    xi = rng.standard_normal(m)
    eta = rng.standard_normal(m)
    spectrum = np.sqrt(eig / m)
    sample = np.fft.fft(spectrum * (xi + 1j * eta)).real[:n]
    return sample, SampleInfo(seed=seed_echo, embed_size=m, clip_mass=clip_mass)


def _rho_at(model: CorrelationModel, lags: np.ndarray) -> np.ndarray:
    """rho at arbitrary positive integer lags (vectorized)."""
    if model.kind == "zero":
        return np.zeros(len(lags))
    if model.kind == "finite":
        out = np.zeros(len(lags))
        for lag, v in model.table:
            out[lags == lag] = v
        return out
    if model.kind == "exponential":
        return model.C * model.decay ** lags.astype(np.float64)
    return model.sigma * lags.astype(np.float64) ** -model.s


def save_sample(omega: np.ndarray, info: SampleInfo, path_prefix: str) -> tuple[str, str]:
    """Write a sample as 8-byte little-endian floats plus JSON metadata."""
    import json

    bin_path = path_prefix + ".bin"
    meta_path = path_prefix + ".json"
    with open(bin_path, "wb") as fh:
        fh.write(np.asarray(omega, dtype="<f8").tobytes())
    with open(meta_path, "w") as fh:
        json.dump(
            {
                "seed": info.seed,
                "embed_size": info.embed_size,
                "clip_mass": info.clip_mass,
                "length": int(len(omega)),
                "dtype": "<f8",
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return bin_path, meta_path
