from __future__ import annotations

import math

import numpy as np
import pytest

from corrpin import (
    INFINITE,
    PotentialSpec,
    annealed_log_z_dp,
    build_transfer,
    exponential_model,
    finite_law,
    finite_model,
    geometric_law,
    gibbs_gap_marginal,
    gurevich_pressure,
    mean_gap_gibbs,
    periodic_orbit_pressure,
    power_model,
    rpf_eigenfunction_limit,
    spectral,
    zero_model,
    zeta_law,
)
from corrpin.transfer import induced_row_sums


def _op(law, model, beta, F=0.0, offset=0.0, q=None):
    truncated = model.truncate(q) if q is not None else model
    return build_transfer(
        PotentialSpec(law=law, model=truncated, beta=beta, F=F, pressure_offset=offset)
    )


class TestBuild:
    def test_iid_is_single_cell_with_unit_mass(self):
        op = _op(zeta_law(0.5), zero_model(), 1.0)
        assert op.dim == 1
        assert op.tail == 1.0

    def test_deterministic_gap_single_state(self):
        op = _op(finite_law({1: 1.0}), finite_model({1: 0.5, 2: 0.25}), 1.0)
        assert op.mode == "dense"
        assert op.dim == 1
        assert op.states.tolist() == [0b11]
        assert op.matrix[0, 0] == pytest.approx(math.exp(0.75), rel=1e-15)

    def test_full_mode_matvec_matches_dense(self, rng):
        law = zeta_law(0.6)
        model = finite_model({1: 0.3, 2: -0.2, 3: 0.1})
        op = _op(law, model, 1.1, F=0.05)
        mat = op.to_dense()
        v = rng.random(op.dim)
        assert np.allclose(op.matvec(v), mat @ v, rtol=1e-13)
        assert np.allclose(op.rmatvec(v), mat.T @ v, rtol=1e-13)

    def test_requires_finite_range(self):
        with pytest.raises(ValueError):
            PotentialSpec(law=zeta_law(0.5), model=exponential_model(0.5, 0.5), beta=1.0)


class TestSpectral:
    def test_single_cell(self):
        op = _op(geometric_law(0.5), zero_model(), 0.7)
        sr = spectral(op)
        assert sr.lam == pytest.approx(1.0, abs=1e-15)
        assert sr.v_right[0] == pytest.approx(1.0)
        assert sr.v_left[0] == pytest.approx(1.0)

    def test_iid_lambda_is_one_for_any_law(self):
        for law in (zeta_law(0.3), zeta_law(0.5), geometric_law(0.5)):
            sr = spectral(_op(law, zero_model(), 1.3))
            assert sr.log_lambda == pytest.approx(0.0, abs=1e-14)

    def test_deterministic_gap_closed_form(self):
        sr = spectral(_op(finite_law({1: 1.0}), finite_model({1: 0.5, 2: 0.25}), 1.0))
        assert sr.log_lambda == pytest.approx(0.75, abs=1e-14)

    @pytest.mark.parametrize(
        "law,model,beta,q",
        [
            (zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, 10),
            (zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, 14),
            (geometric_law(0.5), power_model(0.4, 3.0), 1.2, 12),
            (zeta_law(0.8), finite_model({1: 0.4, 2: -0.3}), 1.5, 8),
        ],
        ids=["exp-q10", "exp-q14", "pow-q12", "mixed-q8"],
    )
    def test_residuals_meet_contract(self, law, model, beta, q):
        op = _op(law, model, beta, q=q)
        sr = spectral(op)
        assert sr.residual <= 1e-13
        assert np.all(sr.v_right > 0)
        assert np.all(sr.v_left > 0)
        assert np.dot(sr.v_left, sr.v_right) == pytest.approx(1.0, rel=1e-12)
        assert sr.v_left.sum() == pytest.approx(1.0, rel=1e-12)

    def test_matches_dense_eig_oracle(self):
        law = zeta_law(0.6)
        model = finite_model({1: 0.35, 2: 0.1, 3: -0.15})
        op = _op(law, model, 1.2)
        sr = spectral(op)
        eigs = np.linalg.eigvals(op.to_dense())
        assert sr.lam == pytest.approx(float(np.max(np.abs(eigs))), rel=1e-12)

    def test_dense_mode_matches_eig_oracle(self):
        law = finite_law({1: 0.4, 5: 0.6})
        model = finite_model({1: 0.3, 2: 0.15})
        op = _op(law, model, 1.0)
        sr = spectral(op)
        eigs = np.linalg.eigvals(op.matrix)
        assert sr.lam == pytest.approx(float(np.max(np.abs(eigs))), rel=1e-12)

    def test_induced_row_sums_are_one(self):
        for op in (
            _op(zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, q=8),
            _op(finite_law({1: 0.4, 5: 0.6}), finite_model({1: 0.3}), 0.8),
        ):
            sr = spectral(op)
            assert np.max(np.abs(induced_row_sums(op, sr) - 1.0)) <= 1e-13

    def test_warm_start_consistency(self):
        op = _op(zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, F=0.01, q=10)
        cold = spectral(op)
        warm = spectral(op, v0=cold.v_right, u0=cold.v_left)
        assert warm.log_lambda == pytest.approx(cold.log_lambda, abs=1e-14)
        assert warm.iterations <= cold.iterations

    def test_loose_value_mode_honors_error_bound(self):
        cases = [
            (zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, 0.0, 10),
            (zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, 0.02, 10),
            (zeta_law(0.3), exponential_model(0.5, 0.8), 1.5, 0.001, 10),
            (geometric_law(0.5), power_model(0.4, 3.0), 1.2, 0.01, 12),
        ]
        for law, model, beta, F, q in cases:
            op = _op(law, model, beta, F=F, q=q)
            exact = spectral(op).log_lambda
            for vtol in (1e-3, 1e-6, 1e-9):
                loose = spectral(op, value_abs_tol=vtol)
                assert abs(loose.log_lambda - exact) <= vtol

    def test_retilt_matches_fresh_build(self):
        base = _op(zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, q=9)
        for F in (0.003, 0.4):
            a = spectral(base.retilt(F)).log_lambda
            b = spectral(_op(zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, F=F, q=9)).log_lambda
            assert a == pytest.approx(b, abs=1e-14)
        dense_base = _op(finite_law({1: 0.4, 5: 0.6}), finite_model({1: 0.3, 2: 0.15}), 1.0)
        for F in (0.01, 0.7):
            a = spectral(dense_base.retilt(F)).log_lambda
            b = spectral(
                _op(finite_law({1: 0.4, 5: 0.6}), finite_model({1: 0.3, 2: 0.15}), 1.0, F=F)
            ).log_lambda
            assert a == pytest.approx(b, abs=1e-14)


class TestPressure:
    def test_iid_zero_for_all_beta(self):
        for beta in (0.3, 1.0, 2.0):
            est, _ = gurevich_pressure(zeta_law(0.5), zero_model(), beta, 0.0, 0)
            assert est.value == pytest.approx(0.0, abs=1e-14)
            assert est.lower == est.upper == est.value

    def test_deterministic_gap_value(self):
        est, _ = gurevich_pressure(finite_law({1: 1.0}), finite_model({1: 0.5, 2: 0.25}), 1.0, 0.0, 2)
        assert est.value == pytest.approx(0.75, abs=1e-14)

    def test_brackets_nest_in_q(self):
        law, model = zeta_law(0.5), exponential_model(0.5, 0.5)
        prev = None
        for q in (4, 6, 8, 10):
            est, _ = gurevich_pressure(law, model, 1.0, 0.0, q)
            assert est.lower <= est.value <= est.upper
            assert est.upper - est.lower <= 2 * model.tail_abs_sum(q + 1) + 1e-15
            if prev is not None:
                assert est.lower >= prev[0] - 1e-15
                assert est.upper <= prev[1] + 1e-15
            prev = (est.lower, est.upper)

    def test_strictly_decreasing_in_tilt_with_bound(self):
        law, model = zeta_law(0.5), exponential_model(0.5, 0.5)
        fs = np.linspace(0.0, 0.7, 8)
        vals = [gurevich_pressure(law, model, 1.0, f, 8)[0].value for f in fs]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        # P(F1 + F2) <= P(F1) - F2
        for i, f1 in enumerate(fs):
            for j in range(i + 1, len(fs)):
                f2 = fs[j] - f1
                assert vals[j] <= vals[i] - f2 + 1e-12

    def test_null_pressure_with_offset(self):
        law, model = zeta_law(0.5), exponential_model(0.5, 0.5)
        base, _ = gurevich_pressure(law, model, 1.0, 0.0, 10)
        centered, _ = gurevich_pressure(law, model, 1.0, 0.0, 10, offset=base.value)
        assert centered.value == pytest.approx(0.0, abs=1e-12)

    def test_log_mode_continuity(self):
        import mpmath as mp

        law = zeta_law(0.5)
        for F in (99.0, 121.0):  # straddles the log-mode switch
            est, _ = gurevich_pressure(law, zero_model(), 1.0, F, 5)
            with mp.workdps(30):
                exact = float(mp.log(mp.polylog(1.5, mp.e ** (-F)) / mp.zeta(1.5)))
            assert est.value == pytest.approx(exact, abs=1e-12)


class TestPeriodicOrbits:
    def test_iid_factorizes(self):
        law = zeta_law(0.5)
        cap = 60
        po = periodic_orbit_pressure(law, zero_model(), 1.0, 0.0, 3, 1, cap)
        s_cap = float(law.k_masses(cap).sum())
        expect = (math.log(law.k_mass(1)) + 2 * math.log(s_cap)) / 3
        assert po.value == pytest.approx(expect, rel=1e-12)

    def test_deterministic_gap_all_n(self):
        law = finite_law({1: 1.0})
        model = finite_model({1: 0.5, 2: 0.25})
        for n in (1, 2, 3, 5):
            po = periodic_orbit_pressure(law, model, 1.0, 0.0, n, 1, 3)
            assert po.value == pytest.approx(0.75, abs=1e-13)
            assert po.lower_bound <= 0.75

    def test_lower_bound_below_spectral_and_tightening(self):
        law, model = zeta_law(0.5), exponential_model(0.5, 0.5)
        q = 5
        est, _ = gurevich_pressure(law, model, 1.0, 0.0, q)
        prev = -math.inf
        for n in (2, 3, 4, 5):
            po = periodic_orbit_pressure(law, model.truncate(q), 1.0, 0.0, n, 1, 24)
            assert po.lower_bound <= est.value + 1e-12
            assert po.lower_bound >= prev - 1e-12
            prev = po.lower_bound
        # values approach the pressure within O(1/n)
        gaps = [
            abs(periodic_orbit_pressure(law, model.truncate(q), 1.0, 0.0, n, 1, 24).value - est.value)
            for n in (3, 5)
        ]
        assert gaps[1] <= gaps[0]

    def test_budget_refusal(self):
        with pytest.raises(ValueError, match="budget"):
            periodic_orbit_pressure(zeta_law(0.5), zero_model(), 1.0, 0.0, 6, 1, 200)


class TestGibbs:
    def test_iid_marginal_is_the_law(self):
        law = zeta_law(0.5)
        gm = gibbs_gap_marginal(law, zero_model(), 1.0, 0, 25)
        assert np.max(np.abs(gm.masses - law.k_masses(25))) <= 1e-14
        assert gm.tail_constant == pytest.approx(1.0, abs=1e-14)

    def test_tail_ratio_constant(self):
        law, model = zeta_law(0.5), exponential_model(0.5, 0.5)
        gm = gibbs_gap_marginal(law, model, 1.0, 8, 40)
        ratios = gm.masses[8:] / law.k_masses(40)[8:]
        assert np.max(ratios) - np.min(ratios) <= 1e-12 * np.max(ratios)
        assert gm.normalization_defect <= 1e-12

    def test_deterministic_gap(self):
        gm = gibbs_gap_marginal(finite_law({1: 1.0}), finite_model({1: 0.5}), 1.0, 1, 5)
        assert gm.masses[0] == pytest.approx(1.0, abs=1e-14)
        assert np.all(gm.masses[1:] == 0.0)

    def test_normalization_across_fixtures(self):
        cases = [
            (zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, 8),
            (geometric_law(0.5), power_model(0.4, 3.0), 1.3, 8),
            (finite_law({1: 0.4, 5: 0.6}), finite_model({1: 0.3, 2: 0.15}), 1.0, 2),
        ]
        for law, model, beta, q in cases:
            gm = gibbs_gap_marginal(law, model, beta, q, max(q, 12))
            assert gm.normalization_defect <= 1e-12

    def test_mean_gap_values(self):
        mean, frac = mean_gap_gibbs(geometric_law(0.5), zero_model(), 1.0, 0)
        assert mean == pytest.approx(2.0, rel=1e-13)
        assert frac == pytest.approx(0.5, rel=1e-13)
        mean, frac = mean_gap_gibbs(zeta_law(0.5), exponential_model(0.5, 0.5), 0.8, 6)
        assert mean is INFINITE
        assert frac == 0.0
        mean, frac = mean_gap_gibbs(finite_law({1: 1.0}), finite_model({1: 0.5}), 1.0, 1)
        assert mean == pytest.approx(1.0, rel=1e-14)
        assert frac == pytest.approx(1.0, rel=1e-14)


class TestEigenfunctionLimit:
    def test_iid_is_one(self):
        assert rpf_eigenfunction_limit(zeta_law(0.5), zero_model(), 1.0, 0) == pytest.approx(1.0)

    def test_cauchy_bound_on_single_bit_patterns(self):
        # |log h(pattern with lone bit at n) - log h(all-zero)| is controlled
        # by the correlation tail beyond n
        law, model = zeta_law(0.5), exponential_model(0.5, 0.5)
        beta, q = 1.0, 10
        op = _op(law, model, beta, q=q)
        sr = spectral(op)
        truncated = model.truncate(q)
        for d in range(1, q + 1):
            lhs = abs(math.log(sr.v_right[1 << (d - 1)]) - math.log(sr.v_right[0]))
            bound = 2 * beta * beta * sum(truncated.tail_abs_sum(j) for j in range(d, q + 1))
            assert lhs <= bound + 1e-12

    def test_undefined_for_short_support(self):
        with pytest.raises(ValueError, match="undefined"):
            rpf_eigenfunction_limit(finite_law({1: 1.0}), finite_model({1: 0.5}), 1.0, 1)


class TestPerronVsGrowth:
    def test_deterministic_gap_per_site_rate(self):
        # every site is a renewal: per-step and per-site growth coincide
        law = finite_law({1: 1.0})
        model = finite_model({1: 0.5, 2: 0.25})
        sr = spectral(_op(law, model, 1.0))
        cs = []
        for n in (100, 400, 2000):
            lz = annealed_log_z_dp(law, model, 1.0, -0.5, n).log
            cs.append(abs(lz / n - sr.log_lambda) * n)
        assert max(cs) - min(cs) <= 1.0  # fitted C stable
        assert abs(cs[-1] / 2000) < 1e-3

    def test_iid_geometric_per_site_rate(self):
        # lambda = 1 and Z_n(h = -beta^2/2) = P(n in tau) = 1/2 exactly
        law = geometric_law(0.5)
        sr = spectral(_op(law, zero_model(), 1.0))
        for n in (100, 1000):
            lz = annealed_log_z_dp(law, zero_model(), 1.0, -0.5, n).log
            assert abs(lz / n - sr.log_lambda) == pytest.approx(math.log(2) / n, rel=1e-9)
