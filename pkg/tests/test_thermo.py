import math

import numpy as np
import pytest

from peplab.errors import BudgetExceededError, NonGradientError
from peplab.model import RateSpec
from peplab.thermo import (
    LocalFunction,
    ThermoProfile,
    coefficients,
    compressibility,
    einstein_residual,
    log_partition_function,
    marginal_pmf,
    mean_occupancy,
    partition_function,
    phi,
    phi_derivatives,
    phi_prime,
    phi_second,
    solve_lambda,
)

SEP1 = RateSpec.sep(1)
SEP2 = RateSpec.sep(2)
IND2 = RateSpec.indicator(2)


def random_gradient_spec(rng, kappa):
    c = np.concatenate(([0.0], np.sort(rng.uniform(0.2, 3.0, kappa))))
    return RateSpec.gradient_from_c(c)


class TestPartitionFunction:
    def test_sep2_at_unit_fugacity(self):
        # c!(0,1,2) = (1,1,2): Z_1 = 1/2 + 1 + 1/2 = 2
        assert partition_function(SEP2, 1.0) == pytest.approx(2.0, rel=1e-15)

    def test_indicator_polynomial(self):
        # Z = 1 + lam + lam^2
        assert partition_function(IND2, 1.0) == pytest.approx(3.0, rel=1e-15)
        assert partition_function(IND2, 2.0) == pytest.approx(7.0, rel=1e-15)

    def test_small_fugacity_limit(self):
        # only the m=0 term survives: Z -> 1/d!(kappa)
        spec = RateSpec(2, [0, 1, 2], [0, 3, 4])
        dfact = 3.0 * 4.0
        assert partition_function(spec, 1e-14) == pytest.approx(1.0 / dfact, rel=1e-10)

    def test_log_domain_consistency(self):
        spec = RateSpec(3, [0, 0.5, 1.5, 2], [0, 1, 1, 2])
        for lam in (1e-8, 1e-2, 1.0, 1e3, 1e8):
            assert log_partition_function(spec, lam) == pytest.approx(
                math.log(partition_function(spec, lam)), rel=1e-12
            )

    def test_extreme_fugacity_mean_stays_finite(self):
        # shifted log-domain keeps the marginal well defined far out
        assert mean_occupancy(SEP2, 1e120) == pytest.approx(2.0, abs=1e-9)
        assert mean_occupancy(SEP2, 1e-120) == pytest.approx(0.0, abs=1e-9)


class TestSolveLambda:
    def test_sep_closed_form(self):
        # binomial marginal: lambda = rho / (kappa - rho)
        for kappa in (1, 2, 5):
            spec = RateSpec.sep(kappa)
            for rho in (0.2, 0.9 * kappa, kappa / 3):
                assert solve_lambda(spec, rho) == pytest.approx(
                    rho / (kappa - rho), rel=1e-10
                )

    def test_indicator_uniform_marginal(self):
        lam = solve_lambda(IND2, 1.0)
        assert lam == pytest.approx(1.0, rel=1e-10)
        assert marginal_pmf(IND2, lam) == pytest.approx(np.ones(3) / 3, rel=1e-12)

    def test_particle_hole_symmetric_point(self):
        # c = d forces lambda(kappa/2) = 1
        spec = RateSpec(3, [0, 0.7, 1.1, 2.3], [0, 0.7, 1.1, 2.3])
        assert solve_lambda(spec, 1.5) == pytest.approx(1.0, rel=1e-10)

    def test_rejects_boundary_density(self):
        with pytest.raises(ValueError):
            solve_lambda(SEP2, 0.0)
        with pytest.raises(ValueError):
            solve_lambda(SEP2, 2.0)

    def test_monotone_on_log_grid(self):
        spec = RateSpec(2, [0, 0.4, 1.9], [0, 2.5, 0.8]).normalize()
        lams = np.logspace(-6, 6, 61)
        means = [mean_occupancy(spec, lam) for lam in lams]
        assert all(b > a for a, b in zip(means, means[1:]))

    def test_roundtrip(self):
        spec = RateSpec(3, [0, 1, 1.5, 4], [0, 0.5, 2, 3]).normalize()
        for lam in (0.1, 1.0, 10.0):
            rho = mean_occupancy(spec, lam)
            assert solve_lambda(spec, rho) == pytest.approx(lam, rel=1e-10)


class TestCompressibility:
    def test_sep2_binomial(self):
        # kappa p (1-p) with p = rho/kappa
        assert compressibility(SEP2, 1.0) == pytest.approx(0.5, rel=1e-12)

    def test_indicator_uniform(self):
        assert compressibility(IND2, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_sep1_bernoulli(self):
        assert compressibility(SEP1, 0.5) == pytest.approx(0.25, rel=1e-12)

    def test_matches_fugacity_derivative(self):
        # chi = lambda / (d lambda / d rho), derivative by central difference
        rng = np.random.default_rng(7)
        for _ in range(5):
            spec = random_gradient_spec(rng, 3)
            rho = rng.uniform(0.4, 2.6)
            h = 1e-6
            dlam = (solve_lambda(spec, rho + h) - solve_lambda(spec, rho - h)) / (2 * h)
            chi_alt = solve_lambda(spec, rho) / dlam
            assert compressibility(spec, rho) == pytest.approx(chi_alt, abs=1e-8)


class TestPhi:
    def test_occupancy_is_identity(self):
        for spec in (SEP1, SEP2, IND2):
            f = LocalFunction.eta0(spec.kappa)
            rho = 0.5 * spec.kappa
            assert phi(spec, f, rho) == pytest.approx(rho, abs=1e-12)
            p1, p2 = phi_derivatives(spec, f, rho)
            assert p1 == pytest.approx(1.0, abs=1e-10)
            assert p2 == pytest.approx(0.0, abs=1e-6)

    def test_phi_c_for_sep2(self):
        # Phi_c(rho) = rho and equals c(kappa) lambda/(1+lambda)
        f = LocalFunction.of_c(SEP2)
        rho = 0.7
        lam = solve_lambda(SEP2, rho)
        assert phi(SEP2, f, rho) == pytest.approx(rho, abs=1e-12)
        assert 2 * lam / (1 + lam) == pytest.approx(rho, abs=1e-12)

    def test_phi_r_sep(self):
        # Phi_r(rho) = rho (kappa - rho) for SEP(kappa)
        for kappa, rho in ((1, 0.3), (2, 1.0), (3, 2.2)):
            spec = RateSpec.sep(kappa)
            f = LocalFunction.of_rate(spec)
            assert phi(spec, f, rho) == pytest.approx(rho * (kappa - rho), abs=1e-11)

    def test_prime_matches_finite_difference(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            kappa = int(rng.integers(1, 4))
            width = int(rng.integers(1, 4))
            spec = RateSpec(
                kappa,
                np.concatenate(([0], rng.uniform(0.2, 3.0, kappa))),
                np.concatenate(([0], rng.uniform(0.2, 3.0, kappa))),
            )
            table = rng.standard_normal((kappa + 1,) * width)
            f = LocalFunction(kappa, table)
            rho = rng.uniform(0.2, 0.8) * kappa
            h = 1e-5 * kappa
            fd = (phi(spec, f, rho + h) - phi(spec, f, rho - h)) / (2 * h)
            assert phi_prime(spec, f, rho) == pytest.approx(fd, abs=1e-6)

    def test_support_cap(self):
        f = LocalFunction(1, np.zeros((2,) * 9))
        with pytest.raises(BudgetExceededError):
            phi(SEP1, f, 0.5)


class TestCoefficients:
    def test_sep_closed_forms(self):
        for kappa in (1, 2, 5):
            spec = RateSpec.sep(kappa)
            rho = 0.37 * kappa
            co = coefficients(spec, rho, alpha=0.9, n=64)
            assert co.D == pytest.approx(kappa / 2, rel=1e-10)
            assert co.Lambda == pytest.approx(-0.9, rel=1e-8)
            assert co.v_tilde == pytest.approx(0.9 * rho * (kappa - rho), rel=1e-10)
            assert co.qv_limit == pytest.approx(rho * (kappa - rho), rel=1e-10)

    def test_vn_vanishes_at_half_filling(self):
        co = coefficients(SEP1, 0.5, alpha=1.3, n=100)
        assert co.v_n == pytest.approx(0.0, abs=1e-9)

    def test_vn_value(self):
        # Phi_r'(rho) = 1 - 2 rho for SEP(1): v_n = alpha n^{3/2} (1 - 2 rho)
        co = coefficients(SEP1, 0.25, alpha=1.0, n=100)
        assert co.v_n == pytest.approx(500.0, rel=1e-9)

    def test_rejects_non_gradient(self):
        with pytest.raises(NonGradientError):
            coefficients(IND2, 1.0, alpha=1.0, n=4)


class TestEinstein:
    def test_sep_examples(self):
        assert einstein_residual(SEP2, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert einstein_residual(SEP1, 0.3) == pytest.approx(0.0, abs=1e-12)

    def test_gradient_family_vanishes(self):
        spec = RateSpec.gradient_from_c([0, 0.5, 1.5, 2.0])
        assert abs(einstein_residual(spec, 1.2)) <= 1e-8

    def test_non_gradient_fails_identity(self):
        with pytest.raises(NonGradientError):
            einstein_residual(IND2, 1.0)
        worst = max(
            abs(einstein_residual(IND2, r, allow_nongradient=True))
            for r in np.linspace(0.2, 1.8, 9)
        )
        assert worst > 1e-3


class TestThermoProfile:
    def test_fugacity_cache_consistency(self):
        prof = ThermoProfile(SEP2)
        assert prof.lambda_of_rho(1.0) == pytest.approx(1.0, rel=1e-10)
        assert prof.chi(1.0) == pytest.approx(0.5, rel=1e-12)
        assert prof.rho_of_lambda(1.0) == pytest.approx(1.0, rel=1e-12)
        f = LocalFunction.of_rate(SEP2)
        assert prof.phi(f, 1.0) == pytest.approx(1.0, abs=1e-11)

    def test_phi_second_of_rate(self):
        # Phi_r = rho(kappa - rho) has curvature -2 for every SEP(kappa)
        for kappa in (1, 2):
            spec = RateSpec.sep(kappa)
            f = LocalFunction.of_rate(spec)
            assert phi_second(spec, f, 0.4 * kappa) == pytest.approx(-2.0, abs=1e-6)
