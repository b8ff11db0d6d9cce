from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from corrpin import (
    annealed_log_z_bracket,
    annealed_log_z_bruteforce,
    annealed_log_z_dp,
    exponential_model,
    finite_law,
    finite_model,
    geometric_law,
    homogeneous_log_z,
    past_log_z,
    quenched_log_z,
    zero_model,
    zeta_law,
)
from corrpin.partition import quenched_log_z_bruteforce
from tests.conftest import random_finite_model, random_law


def composition_oracle_annealed(law, model, beta, h, n, origin=False):
    """Sum over renewal sets of [1, n] with n pinned, by direct iteration."""
    logs = []
    for bits in itertools.product((0, 1), repeat=n - 1):
        sites = [i + 1 for i, b in enumerate(bits) if b] + [n]
        masses = [law.k_mass(int(g)) for g in np.diff([0] + sites)]
        if any(k == 0.0 for k in masses):
            continue
        pts = ([0] + sites) if origin else sites
        weight = math.fsum(math.log(k) for k in masses)
        weight += (h + beta * beta / 2) * len(sites)
        weight += beta * beta * math.fsum(
            model.rho(b - a) for a, b in itertools.combinations(pts, 2)
        )
        logs.append(weight)
    if not logs:
        return -math.inf
    m = max(logs)
    return m + math.log(math.fsum(math.exp(x - m) for x in logs))


class TestBruteForce:
    def test_deterministic_gap_hand_value(self):
        # single configuration: 3 contacts, pair distances (1, 1, 2)
        law = finite_law({1: 1.0})
        model = finite_model({1: 0.5, 2: 0.25})
        lz = annealed_log_z_bruteforce(law, model, 1.0, 0.0, 3)
        assert lz.log == pytest.approx(2.75, abs=1e-14)

    def test_matches_slow_composition_oracle(self, rng):
        for _ in range(15):
            law = random_law(rng)
            model = random_finite_model(rng)
            beta = float(rng.uniform(0, 1.2))
            h = float(rng.uniform(-1, 0.5))
            n = int(rng.integers(2, 9))
            fast = annealed_log_z_bruteforce(law, model, beta, h, n).log
            slow = composition_oracle_annealed(law, model, beta, h, n)
            assert fast == pytest.approx(slow, abs=1e-11)

    def test_origin_convention_against_oracle(self, rng):
        for _ in range(8):
            law = random_law(rng)
            model = random_finite_model(rng)
            fast = annealed_log_z_bruteforce(law, model, 1.0, -0.2, 6, origin_interacts=True).log
            slow = composition_oracle_annealed(law, model, 1.0, -0.2, 6, origin=True)
            assert fast == pytest.approx(slow, abs=1e-11)

    def test_beta_zero_reduces_to_homogeneous(self, rng):
        for _ in range(6):
            law = random_law(rng)
            h = float(rng.uniform(-0.5, 0.8))
            n = int(rng.integers(2, 13))
            bf = annealed_log_z_bruteforce(law, random_finite_model(rng), 0.0, h, n).log
            hom = homogeneous_log_z(law, h, n).log
            assert bf == pytest.approx(hom, rel=1e-13, abs=1e-13)

    def test_iid_shift_identity(self, rng):
        # with no correlations the disorder average is a plain h-shift
        for beta in (0.5, 1.0):
            law = zeta_law(0.5)
            bf = annealed_log_z_bruteforce(law, zero_model(), beta, -0.3, 12).log
            hom = homogeneous_log_z(law, -0.3 + beta * beta / 2, 12).log
            assert bf == pytest.approx(hom, rel=1e-13, abs=1e-13)

    def test_refuses_large_n(self):
        with pytest.raises(ValueError, match="capped"):
            annealed_log_z_bruteforce(zeta_law(0.5), zero_model(), 1.0, 0.0, 25)

    def test_free_boundary_dominates_pinned(self, rng):
        for _ in range(5):
            law = random_law(rng)
            model = random_finite_model(rng, allow_negative=False)
            n = int(rng.integers(2, 11))
            p = annealed_log_z_bruteforce(law, model, 0.8, 0.1, n, "pinned").log
            f = annealed_log_z_bruteforce(law, model, 0.8, 0.1, n, "free").log
            assert f >= p - 1e-13


class TestPatternDP:
    def test_matches_bruteforce_randomized(self, rng):
        for _ in range(40):
            law = random_law(rng)
            model = random_finite_model(rng)
            beta = float(rng.uniform(0, 1.5))
            h = float(rng.uniform(-1, 0.5))
            n = int(rng.integers(1, 15))
            boundary = "pinned" if rng.random() < 0.7 else "free"
            origin = bool(rng.random() < 0.3)
            bf = annealed_log_z_bruteforce(law, model, beta, h, n, boundary, origin).log
            dp = annealed_log_z_dp(law, model, beta, h, n, boundary, origin).log
            assert dp == pytest.approx(bf, rel=1e-10, abs=1e-10)

    def test_deterministic_gap_exact(self):
        dp = annealed_log_z_dp(finite_law({1: 1.0}), finite_model({1: 0.5, 2: 0.25}), 1.0, 0.0, 3)
        assert dp.log == pytest.approx(2.75, abs=1e-13)

    def test_zero_range_reduction(self):
        law = geometric_law(0.4)
        dp = annealed_log_z_dp(law, zero_model(), 1.2, -0.1, 40).log
        hom = homogeneous_log_z(law, -0.1 + 1.2**2 / 2, 40).log
        assert dp == pytest.approx(hom, rel=1e-12)

    def test_infinite_range_rejected(self):
        with pytest.raises(ValueError, match="bracket"):
            annealed_log_z_dp(zeta_law(0.5), exponential_model(0.5, 0.5), 1.0, 0.0, 10)

    def test_monotone_in_h(self):
        law = zeta_law(0.5)
        model = finite_model({1: 0.5})
        vals = [annealed_log_z_dp(law, model, 1.0, h, 30).log for h in (-0.5, -0.1, 0.2, 0.8)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_monotone_in_rho_for_nonnegative_models(self):
        law = zeta_law(0.5)
        base = annealed_log_z_dp(law, finite_model({1: 0.3, 2: 0.1}), 1.0, 0.0, 20).log
        upper = annealed_log_z_dp(law, finite_model({1: 0.35, 2: 0.1}), 1.0, 0.0, 20).log
        assert upper > base

    def test_no_underflow_at_large_n(self):
        # strongly delocalized: log Z ~ -n, far below float underflow as a weight
        law = geometric_law(0.5)
        lz = annealed_log_z_dp(law, finite_model({1: 0.2}), 0.5, -800.0, 2000).log
        assert np.isfinite(lz)
        assert lz < -1000


class TestBracket:
    def test_finite_range_zero_width(self):
        law = zeta_law(0.5)
        model = finite_model({1: 0.5, 2: 0.25})
        lo, hi = annealed_log_z_bracket(law, model, 1.0, 0.0, 20, 2)
        assert lo.log == hi.log

    def test_width_formula_and_nesting(self):
        law = zeta_law(0.5)
        model = exponential_model(0.5, 0.5)
        beta, h, n = 1.0, -0.2, 50
        widths = []
        prev = None
        for q in (4, 5, 6, 8):
            lo, hi = annealed_log_z_bracket(law, model, beta, h, n, q)
            widths.append(hi.log - lo.log)
            assert hi.log - lo.log <= 2 * n * beta**2 * model.tail_abs_sum(q + 1) + 1e-12
            if prev is not None:
                assert lo.log >= prev[0] - 1e-12 and hi.log <= prev[1] + 1e-12
            prev = (lo.log, hi.log)
        assert widths[1] <= widths[0] * 0.51

    def test_contains_exact_value(self, rng):
        law = geometric_law(0.5)
        model = exponential_model(0.5, 0.5)
        n = 12
        exact = annealed_log_z_bruteforce(law, model, 1.0, 0.0, n).log
        for q in (2, 4, 6):
            lo, hi = annealed_log_z_bracket(law, model, 1.0, 0.0, n, q)
            assert lo.log - 1e-12 <= exact <= hi.log + 1e-12


class TestQuenched:
    def test_single_site(self):
        law = zeta_law(0.5)
        om = np.array([0.7])
        lz = quenched_log_z(law, om, 1.3, 0.2, 1)
        assert lz.log == pytest.approx(math.log(law.k_mass(1)) + 1.3 * 0.7 + 0.2, abs=1e-13)

    def test_beta_zero_is_homogeneous(self, rng):
        law = geometric_law(0.5)
        om = rng.standard_normal(30)
        lz = quenched_log_z(law, om, 0.0, 0.3, 30).log
        assert lz == pytest.approx(homogeneous_log_z(law, 0.3, 30).log, rel=1e-13)

    def test_matches_enumeration(self, rng):
        for _ in range(10):
            law = random_law(rng)
            n = int(rng.integers(1, 11))
            om = rng.standard_normal(n)
            beta = float(rng.uniform(0, 1.5))
            h = float(rng.uniform(-1, 1))
            boundary = "pinned" if rng.random() < 0.7 else "free"
            fast = quenched_log_z(law, om, beta, h, n, boundary).log
            slow = quenched_log_z_bruteforce(law, om, beta, h, n, boundary).log
            assert fast == pytest.approx(slow, abs=1e-12)

    def test_rescaling_stability(self, rng):
        # localized regime: log Z ~ +n; delocalized: ~ -n; both must stay finite
        law = geometric_law(0.5)
        om = rng.standard_normal(3000)
        up = quenched_log_z(law, om, 1.0, 2.0, 3000).log
        dn = quenched_log_z(law, om, 1.0, -900.0, 3000).log
        assert np.isfinite(up) and up > 1000
        assert np.isfinite(dn) and dn < -1000


class TestPast:
    def test_single_gap_example(self):
        # one gap of length 1; the arriving point sees the origin at distance 1
        law = finite_law({1: 1.0})
        model = finite_model({1: 0.5})
        lz = past_log_z(law, model, 1.0, 0.0, 1, (1,))
        assert lz.log == pytest.approx(1.0, abs=1e-14)

    def test_distant_past_matches_origin_dp(self, rng):
        for _ in range(6):
            law = random_law(rng)
            model = random_finite_model(rng)
            q = model.range_q
            n = int(rng.integers(1, 12))
            far = past_log_z(law, model, 0.9, -0.1, n, (q + 1, 1, 1)).log
            dp = annealed_log_z_dp(law, model, 0.9, -0.1, n, origin_interacts=True).log
            assert far == pytest.approx(dp, rel=1e-12, abs=1e-12)

    def test_past_bracket_inequality(self, rng):
        # the past-augmented value and the origin-convention value differ by
        # at most beta^2 sum n|rho_n| in log
        for _ in range(12):
            law = random_law(rng)
            model = random_finite_model(rng)
            beta = float(rng.uniform(0.1, 1.2))
            n = int(rng.integers(1, 13))
            past = tuple(int(g) for g in rng.integers(1, 5, size=4))
            za = annealed_log_z_bruteforce(law, model, beta, -0.1, n, origin_interacts=True).log
            zp = past_log_z(law, model, beta, -0.1, n, past).log
            if za == -math.inf:  # size n unreachable under this gap law
                assert zp == -math.inf
                continue
            bound = beta * beta * model.n_weighted_abs_sum()
            assert abs(za - zp) <= bound + 1e-12


class TestSuperadditivity:
    def test_with_delta_correction(self, rng):
        from corrpin import delta_correction

        law = geometric_law(0.5)
        for model in (finite_model({1: 0.5}), finite_model({1: 0.3, 2: -0.2, 3: 0.1})):
            beta = 1.0
            logz = {
                k: annealed_log_z_bruteforce(law, model, beta, -0.2, k).log
                for k in range(1, 17)
            }
            for n in range(1, 9):
                for m in range(1, 9):
                    corr = beta * beta * delta_correction(model, m)
                    assert logz[n + m] >= logz[n] + logz[m] - corr - 1e-11
