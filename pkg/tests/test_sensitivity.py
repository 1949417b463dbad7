import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridge_unlearn.errors import DomainError, NumericalError
from ridge_unlearn.langevin import TrajectoryConfig, empirical_sensitivity_sweep
from ridge_unlearn.numerics import RngSeed
from ridge_unlearn.ridge import Dataset, build_spec
from ridge_unlearn.sensitivity import (
    ResidualStats,
    hp_bounds,
    point_profile,
    residual_stats,
    sensitivity_map,
)

from conftest import synthetic


def closed_form_stats(spec, data, theta0, sigma, T, i):
    # mu_k = x^T (M^k theta0 + sum_{j<k} M^j eta B) - y ;  v_k = 2 eta s^2 sum_{j<k} ||(M^j)^T x||^2
    x, y = data.X[i], data.Y[i]
    mu, v = [], []
    for k in range(T + 1):
        m = np.linalg.matrix_power(spec.M, k) @ theta0
        acc = 0.0
        for j in range(k):
            Mj = np.linalg.matrix_power(spec.M, j)
            m = m + Mj @ (spec.eta * spec.B)
            acc += float(np.sum((Mj.T @ x) ** 2))
        mu.append(x @ m - y)
        v.append(2 * spec.eta * sigma**2 * acc)
    return np.array(mu), np.array(v)


class TestResidualStats:
    def test_closed_forms(self, data50):
        spec = build_spec(data50, 0.01)
        theta0 = np.random.default_rng(0).standard_normal((5, 3))
        stats = residual_stats(spec, data50, theta0, 0.05, 30, 7)
        mu, v = closed_form_stats(spec, data50, theta0, 0.05, 30, 7)
        assert np.allclose(stats.mu, mu, rtol=1e-8, atol=1e-12)
        assert np.allclose(stats.v, v, rtol=1e-8, atol=0)

    def test_initial_terms(self, data50):
        spec = build_spec(data50, 0.01)
        theta0 = np.ones((5, 3))
        stats = residual_stats(spec, data50, theta0, 0.2, 5, 3)
        x = data50.X[3]
        assert np.allclose(stats.mu[0], x @ theta0 - data50.Y[3])
        assert stats.v[0] == 0.0
        assert stats.v[1] == pytest.approx(2 * spec.eta * 0.04 * x @ x, rel=1e-12)

    def test_null_drift(self):
        data = Dataset(np.random.default_rng(1).standard_normal((6, 2)), np.zeros((6, 2)))
        spec = build_spec(data, 0.1)
        stats = residual_stats(spec, data, np.zeros((2, 2)), 0.1, 10, 0)
        assert np.all(stats.mu == 0.0)

    @given(st.integers(0, 10_000), st.floats(1e-3, 1.0))
    @settings(max_examples=25, deadline=None)
    def test_v_monotone_and_bounded(self, seed, sigma):
        data = synthetic(10, 3, 2, seed=seed)
        spec = build_spec(data, 0.1)
        for i in range(3):
            v = residual_stats(spec, data, np.zeros((3, 2)), sigma, 60, i).v
            x2 = float(data.X[i] @ data.X[i])
            cap = 2 * spec.eta * sigma**2 * x2 / (1 - spec.c**2)
            assert np.all(np.diff(v) >= 0)
            assert v[-1] <= cap * (1 + 1e-10)

    def test_bad_inputs(self, data50):
        spec = build_spec(data50, 0.01)
        with pytest.raises(IndexError):
            residual_stats(spec, data50, np.zeros((5, 3)), 0.1, 3, 50)
        with pytest.raises(DomainError):
            residual_stats(spec, data50, np.zeros((5, 3)), 0.0, 3, 0)


class TestHpBounds:
    def spec(self):
        return build_spec(Dataset(np.eye(2), np.zeros((2, 2))), 1.0)

    def test_point_mass(self):
        spec = self.spec()
        stats = ResidualStats(np.array([[3.0, 4.0], [0.0, 0.0]]), np.array([0.0, 0.0]))
        prof = hp_bounds(stats, spec, 2.0, 0.1, 1, 2)
        assert prof.bounds[0] == pytest.approx(spec.eta * 2.0 * 5.0)

    def test_central_dof2(self):
        spec = self.spec()
        T = 20
        delta_s = 0.05 * T  # 1 - delta_s/T = 0.95
        stats = ResidualStats(np.zeros((T + 1, 2)), np.ones(T + 1))
        prof = hp_bounds(stats, spec, 1.5, 0.999, T, 2)
        level = 1 - 0.999 / T
        assert prof.bounds[3] == pytest.approx(spec.eta * 1.5 * math.sqrt(-2 * math.log(1 - level)), rel=1e-9)
        stats1 = ResidualStats(np.zeros((2, 2)), np.ones(2))
        prof1 = hp_bounds(stats1, spec, 1.5, 0.05, 1, 2)
        assert prof1.bounds[0] == pytest.approx(spec.eta * 1.5 * math.sqrt(5.991464547), rel=1e-9)
        assert delta_s > 0

    def test_precision_error(self):
        spec = self.spec()
        stats = ResidualStats(np.zeros((3, 2)), np.ones(3))
        with pytest.raises(NumericalError):
            hp_bounds(stats, spec, 1.0, 1e-17, 2, 2)
        with pytest.raises(DomainError):
            hp_bounds(stats, spec, 1.0, 1.5, 2, 2)

    def test_zero_feature(self, data50):
        X = data50.X.copy()
        X[4] = 0.0
        data = Dataset(X, data50.Y)
        spec = build_spec(data, 0.01)
        prof = point_profile(spec, data, np.zeros((5, 3)), 0.01, 10, 0.05, 4)
        assert np.all(prof.bounds == 0.0)

    def test_overflow_fallback_is_conservative(self):
        # tiny variance with a large mean: the Poisson series is abandoned
        spec = self.spec()
        stats = ResidualStats(np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([1e-14, 1e-14]))
        prof = hp_bounds(stats, spec, 1.0, 0.05, 1, 2)
        assert prof.bounds[0] >= spec.eta * 1.0
        assert prof.bounds[0] <= spec.eta * (1.0 + 1e-6)


class TestMap:
    def test_duplicate_rows(self):
        data = synthetic(10, 3, 2, seed=2)
        X, Y = data.X.copy(), data.Y.copy()
        X[5], Y[5] = X[1], Y[1]
        data = Dataset(X, Y)
        spec = build_spec(data, 0.1)
        smap = sensitivity_map(spec, data, np.zeros((3, 2)), 0.05, 15, 0.05)
        assert np.array_equal(smap.bounds[1], smap.bounds[5])

    def test_single_point(self, data50):
        spec = build_spec(data50, 0.01)
        smap = sensitivity_map(spec, data50, np.zeros((5, 3)), 0.01, 20, 0.05, points=[6])
        prof = point_profile(spec, data50, np.zeros((5, 3)), 0.01, 20, 0.05, 6)
        assert np.allclose(smap.bounds[0], prof.bounds, rtol=1e-12)
        assert smap.profile(0, 0.05).point_index == 6

    def test_sorted(self, data50):
        spec = build_spec(data50, 0.01)
        smap = sensitivity_map(spec, data50, np.zeros((5, 3)), 0.01, 20, 0.05, sort=True)
        assert np.all(np.diff(smap.bounds[:, -1]) >= 0)
        assert sorted(smap.points.tolist()) == list(range(50))

    def test_scaling_first_step(self):
        data = synthetic(10, 3, 1, seed=3)
        spec = build_spec(data, 0.1)
        s = 2.0
        X = data.X.copy()
        X[0] *= s
        scaled = Dataset(X, data.Y)
        spec_s = build_spec(scaled, 0.1)
        v1 = residual_stats(spec, data, np.zeros((3, 1)), 0.1, 1, 0).v[1]
        v1s = residual_stats(spec_s, scaled, np.zeros((3, 1)), 0.1, 1, 0).v[1]
        assert v1s / spec_s.eta == pytest.approx(s**2 * v1 / spec.eta, rel=1e-12)
        b = point_profile(spec, data, np.zeros((3, 1)), 0.1, 2, 0.05, 0).bounds[1] / spec.eta
        bs = point_profile(spec_s, scaled, np.zeros((3, 1)), 0.1, 2, 0.05, 0).bounds[1] / spec_s.eta
        assert bs > s * b

    def test_empty(self, data50):
        spec = build_spec(data50, 0.01)
        with pytest.raises(DomainError):
            sensitivity_map(spec, data50, np.zeros((5, 3)), 0.01, 5, 0.05, points=[])


@pytest.mark.slow
def test_per_step_marginal_coverage(data50):
    # union-bound slack: each step violates with frequency <= delta_s / T
    spec = build_spec(data50, 1e-2)
    T, delta_s, runs = 100, 0.05, 1000
    cfg = TrajectoryConfig(T, 0, 0.01, 0.0, np.zeros((5, 3)), RngSeed(21))
    prof = point_profile(spec, data50, np.zeros((5, 3)), 0.01, T, delta_s, 9)
    emp = empirical_sensitivity_sweep(spec, data50, cfg, 9, runs)
    per_step = np.mean(emp > prof.bounds, axis=0)
    p0 = delta_s / T
    assert np.all(per_step <= p0 + 3 * math.sqrt(p0 * (1 - p0) / runs) + 1 / runs)
