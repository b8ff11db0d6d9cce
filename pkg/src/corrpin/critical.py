"""Annealed critical curve, free energy, and asymptotics comparators.

The annealed critical point is h_c = -beta^2/2 - P(beta), where P(beta)
is the pressure of the base potential; above it the free energy is the
unique positive root F of

    pressure of the F-tilted, pressure-centered potential = -(h - h_c),

solved by bisection on a provably valid bracket (the tilt bound
P(F1+F2) <= P(F1) - F2 forces a sign change by F = delta).  Spectral
solves along the bisection are warm-started from the previous tilt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correlations import CorrelationModel
from .exceptions import NumericsError
from .logdomain import INFINITE, Infinite
from .renewal import RenewalLaw, homogeneous_free_energy, renewal_mass
from .transfer import (
    PotentialSpec,
    PressureEstimate,
    build_transfer,
    gurevich_pressure,
    spectral,
)

_MAX_Q = 20


@dataclass(frozen=True)
class CriticalPoint:
    beta: float
    h_c: float
    lower: float
    upper: float
    q: int
    log_lambda: float


@dataclass(frozen=True)
class FreeEnergyPoint:
    beta: float
    h: float
    delta: float
    free_energy: float
    achieved_tol: float
    q: int


class PressureSolver:
    """Caches the base pressure and warm-starts tilted spectral solves.

    One instance per (law, model, beta, q); safe to reuse across many h
    or delta values.
    """

    def __init__(self, law: RenewalLaw, model: CorrelationModel, beta: float, q: int):
        if not (model.abs_summable and model.n_weighted_summable):
            raise ValueError("the critical-curve theory needs sum n|rho_n| < inf")
        self.law = law
        self.model = model
        self.truncated = model.truncate(q)
        self.beta = beta
        self.q = q
        spec = PotentialSpec(law=law, model=self.truncated, beta=beta, F=0.0)
        self._op0 = build_transfer(spec)
        sr = spectral(self._op0)
        self._v, self._u = sr.v_right, sr.v_left
        half_width = beta * beta * model.tail_abs_sum(q + 1)
        self.base = PressureEstimate(
            value=sr.log_lambda,
            lower=sr.log_lambda - half_width,
            upper=sr.log_lambda + half_width,
            q=q,
            beta=beta,
            F=0.0,
            offset=0.0,
            residual=sr.residual,
            iterations=sr.iterations,
        )
        self.half_width = half_width

    @property
    def log_lambda(self) -> float:
        return self.base.value

    def critical_point(self) -> CriticalPoint:
        h_c = -0.5 * self.beta**2 - self.base.value
        return CriticalPoint(
            beta=self.beta,
            h_c=h_c,
            lower=h_c - self.half_width,
            upper=h_c + self.half_width,
            q=self.q,
            log_lambda=self.base.value,
        )

    def centered_pressure(self, F: float, value_abs_tol: float | None = None) -> float:
        """Pressure of the tilted potential minus the base pressure.

        ``value_abs_tol`` allows the spectral solve to stop once the value
        is provably that accurate (vectors then only partially converged).
        """
        op = self._op0 if F == 0.0 else self._op0.retilt(F)
        sr = spectral(op, v0=self._v, u0=self._u, value_abs_tol=value_abs_tol)
        self._v, self._u = sr.v_right, sr.v_left
        return sr.log_lambda - self.base.value

    def solve_free_energy(self, delta: float, tol: float) -> tuple[float, float]:
        """Root F > 0 of centered_pressure(F) = -delta, by bracketed bisection.

        Returns (F, achieved relative width).  The initial upper bracket
        delta is valid because the pressure drops at least linearly in the
        tilt; it is doubled defensively until the sign change is observed.
        Every bisection decision is validated: an evaluation is accepted
        at reduced spectral precision only when its sign is certain under
        the proven value-error bound, and recomputed exactly otherwise.
        """

        def g(F: float, width: float | None = None) -> float:
            if width is not None:
                # the pressure drops at least linearly in F, so the g-range
                # across the remaining bracket is at least its width
                val = self.centered_pressure(F, value_abs_tol=width / 30.0) + delta
                if abs(val) > 2.0 * width / 30.0:
                    return val
            return self.centered_pressure(F) + delta

        if g(0.0) <= 0:
            raise NumericsError("tilt equation has no positive root: g(0) <= 0")
        lo, hi = 0.0, delta
        g_hi = g(hi, hi)
        doublings = 0
        while g_hi > 0:
            lo, hi = hi, 2 * hi
            g_hi = g(hi, hi - lo)
            doublings += 1
            if doublings > 60:
                raise NumericsError(
                    "no sign change found for the tilt equation; the pressure "
                    "failed to decrease in F (this contradicts the tilt bound)"
                )
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if g(mid, hi - lo) > 0:
                lo = mid
            else:
                hi = mid
            if lo > 0 and (hi - lo) <= tol * lo:
                break
        mid = 0.5 * (lo + hi)
        return mid, (hi - lo) / mid if mid > 0 else 0.0


def critical_curve(
    law: RenewalLaw, model: CorrelationModel, beta: float, q: int
) -> CriticalPoint:
    """Annealed critical point h_c(beta) = -beta^2/2 - log Perron root."""
    if beta == 0.0:
        return CriticalPoint(beta=0.0, h_c=0.0, lower=0.0, upper=0.0, q=q, log_lambda=0.0)
    return PressureSolver(law, model, beta, q).critical_point()


def annealed_free_energy(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    h: float,
    q: int,
    tol: float = 1e-10,
    solver: PressureSolver | None = None,
) -> FreeEnergyPoint:
    """Annealed free energy at (beta, h) from the truncated pressure.

    Zero at and below the (truncated) critical point; otherwise the
    bisection root of the tilt equation, to relative tolerance ``tol``.
    """
    if tol < 1e-12:
        raise ValueError("tolerances below 1e-12 relative are not supported")
    if beta == 0.0:
        f = homogeneous_free_energy(law, h, rtol=tol)
        return FreeEnergyPoint(beta=0.0, h=h, delta=h, free_energy=f, achieved_tol=tol, q=q)
    ps = solver or PressureSolver(law, model, beta, q)
    h_c = -0.5 * beta**2 - ps.base.value
    delta = h - h_c
    if delta <= 0:
        return FreeEnergyPoint(
            beta=beta, h=h, delta=delta, free_energy=0.0, achieved_tol=0.0, q=q
        )
    f, width = ps.solve_free_energy(delta, tol)
    return FreeEnergyPoint(beta=beta, h=h, delta=delta, free_energy=f, achieved_tol=width, q=q)


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    residual: float  # rms of the log-log fit residuals
    constant: float  # exp(intercept)
    deltas: np.ndarray
    f_values: np.ndarray
    f_over_delta: np.ndarray
    q_used: int
    beta: float


def required_q(model: CorrelationModel, beta: float, delta_min: float, q: int) -> int:
    """Smallest q' >= q with 2 beta^2 t(q'+1) <= delta_min / 100."""
    target = delta_min / 100.0
    qq = q
    while 2.0 * beta * beta * model.tail_abs_sum(qq + 1) > target:
        qq += 1
        if qq > _MAX_Q:
            raise NumericsError(
                f"truncation bracket cannot reach {target:.3e} within q <= {_MAX_Q}"
            )
    return qq


def exponent_fit(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    q: int,
    delta_grid,
    tol: float = 1e-10,
) -> ExponentFit:
    """Least-squares slope of log F against log delta above criticality.

    Raises the truncation range until the pressure bracket is at most
    delta_min/100, so bracket noise cannot contaminate the fit; raises if
    any solved F is zero (delta below resolution).
    """
    deltas = np.asarray(sorted(delta_grid), dtype=np.float64)
    if len(deltas) < 2 or deltas[0] <= 0:
        raise ValueError("need at least two positive deltas")
    q_used = required_q(model, beta, float(deltas[0]), q)
    ps = PressureSolver(law, model, beta, q_used)
    fs = np.empty_like(deltas)
    for i, d in enumerate(deltas):
        fs[i], _ = ps.solve_free_energy(float(d), tol)
    if np.any(fs <= 0):
        raise NumericsError("free energy vanished on the grid: delta below resolution")
    x = np.log(deltas)
    y = np.log(fs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - slope * x - intercept) ** 2)))
    return ExponentFit(
        slope=float(slope),
        intercept=float(intercept),
        residual=resid,
        constant=float(np.exp(intercept)),
        deltas=deltas,
        f_values=fs,
        f_over_delta=fs / deltas,
        q_used=q_used,
        beta=beta,
    )


@dataclass(frozen=True)
class SmallBetaRow:
    beta: float
    ratio: float  # h_c(beta) / (-beta^2/2)
    target: float  # 1 + 2 sum rho_n P(n in tau), series cut at n_max
    deviation: float


@dataclass(frozen=True)
class SmallBetaTable:
    rows: tuple[SmallBetaRow, ...]
    target: float
    series_tail_bound: float
    n_max: int
    q: int


def small_beta_check(
    law: RenewalLaw,
    model: CorrelationModel,
    beta_grid,
    q: int,
    n_max: int,
) -> SmallBetaTable:
    """Compare h_c(beta)/(-beta^2/2) with the small-beta series prediction.

    The prediction is 1 + 2 sum_n rho_n P(n in tau); the series is cut at
    n_max with the remainder bounded by 2 t(n_max+1) (renewal masses are
    at most 1).
    """
    u = renewal_mass(law, n_max).u
    rho = model.rho_array(n_max)
    target = 1.0 + 2.0 * float(np.dot(rho, u[1:]))
    tail_bound = 2.0 * model.tail_abs_sum(n_max + 1)
    rows = []
    for beta in beta_grid:
        cp = critical_curve(law, model, beta, q)
        ratio = cp.h_c / (-0.5 * beta * beta)
        rows.append(
            SmallBetaRow(
                beta=beta, ratio=ratio, target=target, deviation=abs(ratio - target)
            )
        )
    return SmallBetaTable(
        rows=tuple(rows), target=target, series_tail_bound=tail_bound, n_max=n_max, q=q
    )


def upper_bound_finite_mean(
    law: RenewalLaw,
    model: CorrelationModel,
    beta: float,
    rel_tol: float = 1e-10,
    n_cap: int = 20_000,
) -> float:
    """Rigorous upper bound on h_c(beta) for finite-mean laws.

    Evaluates -beta^2/2 (1 + 2 sum_n rho_n P(n in tau)) with the series
    cut where its tail bound is negligible, and returns the bound shifted
    up by the worst-case remainder so it stays an upper bound.
    """
    from .renewal import mean_gap

    if mean_gap(law) is INFINITE:
        raise ValueError("the renewal-theorem upper bound requires a finite mean gap")
    n_max = 1
    while model.tail_abs_sum(n_max + 1) > rel_tol / 4 and n_max < n_cap:
        n_max = min(2 * n_max, n_cap)
    u = renewal_mass(law, n_max).u
    rho = model.rho_array(n_max)
    series = float(np.dot(rho, u[1:]))
    remainder = model.tail_abs_sum(n_max + 1)  # |u| <= 1
    return -0.5 * beta * beta * (1.0 + 2.0 * series) + beta * beta * remainder
