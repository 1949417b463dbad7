import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from ridge_unlearn.errors import ContractError, DomainError, NoRootError, SeriesOverflowError
from ridge_unlearn.numerics import (
    NoncentralChiSquareParams,
    RngSeed,
    find_root_monotone,
    gaussian_stream,
    noncentral_chisq_cdf,
    noncentral_chisq_quantile,
    std_normal_cdf,
    std_normal_quantile,
)


def erfc_series_upper_tail(x, terms=40):
    # asymptotic continued-fraction free oracle: Q(x) = phi(x)/x * sum (-1)^k (2k-1)!! / x^(2k)
    phi = math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    total, term = 1.0, 1.0
    for k in range(1, terms):
        term *= -(2 * k - 1) / (x * x)
        if abs(term) < 1e-20:
            break
        total += term
    return phi / x * total


class TestNormal:
    def test_zero(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_upper_tail_at_8(self):
        expected = 1.0 - erfc_series_upper_tail(8.0)
        assert abs(std_normal_cdf(8.0) - expected) <= 1e-16
        assert abs((1.0 - std_normal_cdf(8.0)) - 6.22e-16) < 1e-16

    def test_integration_oracle(self):
        dens = lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi)
        val, _ = integrate.quad(dens, -np.inf, -1.645)
        assert abs(std_normal_cdf(-1.645) - val) < 1e-12
        assert abs(std_normal_cdf(-1.645) - 0.04998) < 1e-5

    def test_nonfinite_rejected(self):
        for bad in (math.inf, -math.inf, math.nan):
            with pytest.raises(DomainError):
                std_normal_cdf(bad)

    def test_quantile_values(self):
        assert std_normal_quantile(0.5) == 0.0
        # bisection oracle on the CDF
        lo, hi = 0.0, 5.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if std_normal_cdf(mid) < 0.975 else (lo, mid)
        assert abs(std_normal_quantile(0.975) - lo) < 1e-10
        assert abs(std_normal_quantile(0.975) - 1.95996) < 1e-4

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_quantile_open_interval(self, p):
        with pytest.raises(DomainError):
            std_normal_quantile(p)

    @given(st.floats(1e-12, 1 - 1e-12))
    def test_quantile_inverts_cdf(self, p):
        assert abs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-10

    @given(st.integers(1, 2**20 - 1))
    def test_quantile_antisymmetric(self, k):
        p = k / 2**20  # 1 - p is exact for dyadic p
        assert std_normal_quantile(p) == pytest.approx(-std_normal_quantile(1 - p), abs=1e-12)

    @given(st.floats(-30, 30))
    def test_symmetry(self, x):
        assert abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) <= 1e-12

    def test_roundtrip_grid(self):
        xs = np.linspace(-6, 6, 241)
        back = [std_normal_quantile(std_normal_cdf(x)) for x in xs]
        assert np.max(np.abs(np.array(back) - xs)) < 1e-8


class TestNoncentralChiSquare:
    def test_params_validate(self):
        with pytest.raises(DomainError):
            NoncentralChiSquareParams(0, 1.0)
        with pytest.raises(DomainError):
            NoncentralChiSquareParams(2, -1.0)
        with pytest.raises(DomainError):
            NoncentralChiSquareParams(2, math.inf)

    def test_origin(self):
        for dof, nc in [(1, 0.0), (3, 2.5), (10, 400.0)]:
            assert noncentral_chisq_cdf(0.0, dof, nc) == 0.0

    def test_negative_x(self):
        with pytest.raises(DomainError):
            noncentral_chisq_cdf(-1.0, 2, 0.0)

    def test_central_dof2_closed_form(self):
        # 5.991 is a rounded quantile; the exact one maps to 0.95
        assert abs(noncentral_chisq_cdf(5.991, 2, 0.0) - (1 - math.exp(-5.991 / 2))) < 1e-12
        assert abs(noncentral_chisq_cdf(-2 * math.log(0.05), 2, 0.0) - 0.95) < 1e-12
        for x in np.linspace(0, 40, 81):
            assert abs(noncentral_chisq_cdf(x, 2, 0.0) - (1 - math.exp(-x / 2))) < 1e-10

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(11)
        mu = np.array([math.sqrt(2.5), 0.0, 0.0])
        hits, total = 0, 0
        for _ in range(10):
            z = rng.standard_normal((10**6, 3)) + mu
            hits += int(np.count_nonzero(np.einsum("ij,ij->i", z, z) <= 7.0))
            total += 10**6
        p_hat = hits / total
        se = math.sqrt(p_hat * (1 - p_hat) / total)
        assert abs(noncentral_chisq_cdf(7.0, 3, 2.5) - p_hat) < 3 * se

    def test_against_scipy(self):
        for dof in (1, 2, 5, 10):
            for nc in (0.0, 0.5, 5.0, 50.0, 2000.0):
                for x in np.linspace(0.1, 3 * (dof + nc) + 20, 9):
                    ours = noncentral_chisq_cdf(x, dof, nc)
                    ref = stats.ncx2.cdf(x, dof, nc) if nc > 0 else stats.chi2.cdf(x, dof)
                    assert abs(ours - ref) < 1e-9

    def test_params_object(self):
        params = NoncentralChiSquareParams(3, 2.5)
        assert params.cdf(7.0) == noncentral_chisq_cdf(7.0, params)
        assert params.quantile(0.5) == noncentral_chisq_quantile(0.5, params)

    def test_quantile_examples(self):
        assert abs(noncentral_chisq_quantile(0.95, 2, 0.0) - (-2 * math.log(0.05))) < 1e-3
        assert abs(noncentral_chisq_quantile(0.95, 1, 0.0) - 3.841) < 1e-3

    def test_quantile_monte_carlo(self):
        rng = np.random.default_rng(3)
        draws = rng.noncentral_chisquare(10, 4.0, size=10**7)
        emp = np.quantile(draws, 0.99)
        q = noncentral_chisq_quantile(0.99, 10, 4.0)
        # order-statistic standard error of an empirical quantile
        dens = stats.ncx2.pdf(q, 10, 4.0)
        se = math.sqrt(0.99 * 0.01 / 10**7) / dens
        assert abs(q - emp) < 4 * se

    def test_quantile_cdf_tolerance(self):
        for p in (1e-6, 0.01, 0.5, 0.99, 1 - 1e-7):
            q = noncentral_chisq_quantile(p, 3, 5.0)
            assert abs(noncentral_chisq_cdf(q, 3, 5.0) - p) <= 1e-9

    def test_series_overflow(self):
        # raised before any huge allocation
        with pytest.raises(SeriesOverflowError):
            noncentral_chisq_cdf(1e14, 2, 1e14)

    def test_quantile_bad_p(self):
        with pytest.raises(DomainError):
            noncentral_chisq_quantile(1.0, 2, 0.0)

    def test_monotone_grid(self):
        xs = np.linspace(0, 60, 121)
        for dof in (1, 2, 5, 10):
            prev_row = None
            for nc in (0.0, 0.5, 5.0, 50.0):
                row = np.array([noncentral_chisq_cdf(x, dof, nc) for x in xs])
                assert np.all(np.diff(row) >= -1e-15)
                if prev_row is not None:
                    assert np.all(row <= prev_row + 1e-15)
                prev_row = row

    def test_quantile_of_cdf_grid(self):
        for dof in (1, 2, 5, 10):
            for nc in (0.0, 0.5, 5.0, 50.0):
                for x in np.linspace(0.5, dof + nc + 4 * math.sqrt(2 * dof + 4 * nc), 6):
                    p = noncentral_chisq_cdf(x, dof, nc)
                    if not 1e-12 < p < 1 - 1e-9:
                        continue
                    assert abs(noncentral_chisq_quantile(p, dof, nc) - x) <= 1e-6 * (1 + x)


class TestRootFinding:
    def test_identity(self):
        assert abs(find_root_monotone(lambda x: x, 3.0, (0.0, 10.0), 1e-12) - 3.0) < 1e-10

    def test_cube(self):
        r = find_root_monotone(lambda x: x**3, 8.0, (0.0, 1.0), 1e-10)
        assert abs(r**3 - 8.0) <= 1e-10

    def test_decreasing(self):
        r = find_root_monotone(lambda x: -x, -4.0, (0.0, 1.0), 1e-12)
        assert abs(r - 4.0) < 1e-10

    def test_chisq_target(self):
        r = find_root_monotone(lambda x: noncentral_chisq_cdf(x, 2, 0.0), 0.95, (0.0, 1.0), 1e-12)
        assert abs(r - 5.991) < 1e-3

    def test_non_monotone(self):
        with pytest.raises(ContractError):
            find_root_monotone(math.sin, 0.1, (0.0, 3.0), 1e-9)

    def test_no_root(self):
        with pytest.raises(NoRootError):
            find_root_monotone(lambda x: math.tanh(x), 2.0, (0.0, 1.0), 1e-9)


class TestStreams:
    def test_determinism(self):
        a = gaussian_stream(RngSeed(5, 2), 1000)
        b = gaussian_stream(RngSeed(5, 2), 1000)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = gaussian_stream(RngSeed(5, 0), 10**5)
        b = gaussian_stream(RngSeed(5, 1), 10**5)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(10**5)

    def test_moments_and_ks(self):
        z = gaussian_stream(RngSeed(123), 10**6)
        assert abs(z.mean()) < 4 / 1000
        assert abs(z.var() - 1.0) < 0.01
        assert stats.kstest(z, "norm").pvalue > 1e-3

    def test_derive(self):
        base = RngSeed(9)
        assert base.derive(1, 2) == base.derive(1, 2)
        assert base.derive(1, 2) != base.derive(2, 1)
        assert base.derive(1).seed == base.seed

    def test_seed_range(self):
        with pytest.raises(DomainError):
            RngSeed(-1)
        with pytest.raises(DomainError):
            RngSeed(0, 2**64)
