"""Quenched-disorder estimation and annealed identity cross-checks.

Replicas of the quenched partition function are generated by exact
circulant-embedding samples of the disorder and the O(n^2) renewal
recursion.  Per-replica seeds are spawned from the master seed in
counter mode, so results are independent of worker count and scheduling;
replicas are accumulated in replica-index order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correlations import CorrelationModel, sample_gaussian
from .partition import annealed_log_z_dp, quenched_log_z_batch
from .renewal import RenewalLaw

_BATCH = 512


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    replicas: int
    seed: int
    n: int

    def __post_init__(self):
        if self.replicas < 2:
            raise ValueError("need at least 2 replicas for a standard error")


def _replica_log_z(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    n: int,
    replicas: int,
    seed: int,
    boundary: str,
) -> np.ndarray:
    """log Z^omega for each replica, in replica order."""
    master = np.random.SeedSequence(seed)
    children = master.spawn(replicas)
    out = np.empty(replicas)
    for start in range(0, replicas, _BATCH):
        stop = min(start + _BATCH, replicas)
        energies = np.empty((stop - start, n))
        for i in range(start, stop):
            omega, _ = sample_gaussian(model, n, children[i])
            energies[i - start] = beta * omega + h
        out[start:stop] = quenched_log_z_batch(law, energies, n, boundary)
    return out


def quenched_free_energy_mc(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    n: int,
    replicas: int,
    seed: int,
    boundary: str = "pinned",
) -> MCEstimate:
    """Monte Carlo estimate of the finite-volume quenched free energy.

    Averages (1/n) log Z^omega over independent replicas; deterministic
    for fixed (config, seed).
    """
    logs = _replica_log_z(law, model, beta, h, n, replicas, seed, boundary) / n
    mean = float(logs.mean())
    stderr = float(logs.std(ddof=1) / math.sqrt(replicas))
    return MCEstimate(mean=mean, stderr=stderr, replicas=replicas, seed=seed, n=n)


@dataclass(frozen=True)
class IdentityCheck:
    log_mean_z: float  # log of the replica average of Z^omega
    log_annealed: float  # exact annealed value from the pattern DP
    z_score: float
    rel_stderr: float
    replicas: int
    seed: int
    n: int


def annealed_identity_check(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    n: int,
    replicas: int,
    seed: int,
    boundary: str = "pinned",
) -> IdentityCheck:
    """Compare the sample mean of Z^omega with the exact annealed Z.

    The disorder average of the quenched partition function equals the
    annealed one exactly (the contact energies are jointly Gaussian), so
    the z-score of the replica mean against the DP value is an end-to-end
    consistency check of sampler + recursion + DP.  Averaging is done in
    log domain with a max shift.
    """
    if n > 400:
        raise ValueError("identity check capped at n = 400 (variance growth)")
    if beta > 0.5:
        raise ValueError("identity check requires beta <= 0.5 (variance growth)")
    if model.range_q is None:
        raise ValueError("identity check needs a finite-range model (exact DP side)")
    logs = _replica_log_z(law, model, beta, h, n, replicas, seed, boundary)
    log_za = annealed_log_z_dp(law, model, beta, h, n, boundary).log
    shift = logs.max()
    w = np.exp(logs - shift)
    mean = float(w.mean())
    stderr = float(w.std(ddof=1) / math.sqrt(replicas))
    z = (mean - math.exp(log_za - shift)) / stderr
    return IdentityCheck(
        log_mean_z=shift + math.log(mean),
        log_annealed=log_za,
        z_score=float(z),
        rel_stderr=stderr / mean,
        replicas=replicas,
        seed=seed,
        n=n,
    )


@dataclass(frozen=True)
class JensenGap:
    quenched_mean: float  # (1/n) E log Z^omega estimate
    quenched_stderr: float
    annealed: float  # (1/n) log of the annealed Z
    gap: float  # annealed - quenched, positive by Jensen
    replicas: int
    seed: int
    n: int


def jensen_gap(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    n: int,
    replicas: int,
    seed: int,
    boundary: str = "pinned",
) -> JensenGap:
    """Quenched mean free energy against the annealed value.

    Jensen's inequality makes the gap nonnegative up to Monte Carlo
    noise, and strictly positive for correlated disorder at beta > 0.
    """
    if model.range_q is None:
        raise ValueError("jensen_gap needs a finite-range model (exact DP side)")
    est = quenched_free_energy_mc(law, model, beta, h, n, replicas, seed, boundary)
    log_za = annealed_log_z_dp(law, model, beta, h, n, boundary).log / n
    return JensenGap(
        quenched_mean=est.mean,
        quenched_stderr=est.stderr,
        annealed=log_za,
        gap=log_za - est.mean,
        replicas=replicas,
        seed=seed,
        n=n,
    )
