"""Analytic residual moments and high-probability per-point sensitivity bounds.

Under Langevin learning with a deterministic start the residual of point i,
``r_{i,k} = x_i^T theta_k - y_i``, is Gaussian with mean ``mu_{i,k}`` and
isotropic covariance ``v_{i,k} I_d``.  Both are obtained from recursions that
never simulate a trajectory:

    m_{k+1} = M m_k + eta B,        mu_{i,k} = x_i^T m_k - y_i
    u_0 = x_i, u_{j+1} = M^T u_j,   v_{i,k} = 2 eta sigma^2 sum_{j<k} ||u_j||^2

so ``||r_{i,k}||^2 / v_{i,k}`` is noncentral chi-square with d degrees of
freedom, and a Bonferroni level of ``1 - delta_s / T`` per step gives bounds
holding jointly over the T pre-step iterates with probability >= 1 - delta_s.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, NumericalError, SeriesOverflowError
from .numerics import noncentral_chisq_quantile
from .ridge import Dataset, RidgeSpec


@dataclasses.dataclass(frozen=True)
class ResidualStats:
    """Residual means (T+1, d) and variances (T+1,) for k = 0 .. T."""

    mu: np.ndarray
    v: np.ndarray

    @property
    def T(self) -> int:
        return len(self.v) - 1


@dataclasses.dataclass(frozen=True)
class SensitivityProfile:
    """Per-step sensitivity bounds s_k for k = 0 .. T-1.

    ``point_index`` is None for profiles not tied to a point (uniform baseline).
    """

    point_index: Optional[int]
    delta_s: Optional[float]
    bounds: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim != 1 or b.size < 1:
            raise DomainError("bounds must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(b)) or np.any(b < 0):
            raise DomainError("bounds must be finite and nonnegative")
        object.__setattr__(self, "bounds", b)

    @property
    def T(self) -> int:
        return self.bounds.size

    def scaled(self, factor: float) -> "SensitivityProfile":
        return SensitivityProfile(self.point_index, self.delta_s, factor * self.bounds)


def _check_T(T):
    if T < 1:
        raise DomainError(f"T must be >= 1, got {T}")


def residual_stats_many(
    spec: RidgeSpec,
    data: Dataset,
    theta0,
    sigma_learn: float,
    T: int,
    points: Sequence[int],
):
    """Residual moments for several points sharing one mean recursion.

    Returns ``(mu, v)`` with shapes (P, T+1, d) and (P, T+1).
    """
    _check_T(T)
    if not sigma_learn > 0:
        raise DomainError(f"sigma_learn must be > 0, got {sigma_learn}")
    idx = np.array([data.check_index(i) for i in points], dtype=int)
    Xs, Ys = data.X[idx], data.Y[idx]
    m = np.array(theta0, dtype=float)
    drift = spec.eta * spec.B
    U = Xs.T.copy()
    mu = np.empty((idx.size, T + 1, data.d))
    v = np.zeros((idx.size, T + 1))
    acc = np.zeros(idx.size)
    noise_var = 2.0 * spec.eta * sigma_learn**2
    for k in range(T + 1):
        mu[:, k] = Xs @ m - Ys
        if k < T:
            m = spec.M @ m + drift
            acc += np.einsum("pi,pi->i", U, U)
            v[:, k + 1] = noise_var * acc
            U = spec.M.T @ U
    return mu, v


def residual_stats(spec, data, theta0, sigma_learn, T, i) -> ResidualStats:
    """Residual moments mu_{i,k}, v_{i,k} for k = 0 .. T of a single point."""
    mu, v = residual_stats_many(spec, data, theta0, sigma_learn, T, [i])
    return ResidualStats(mu[0], v[0])


def _quantile_or_shifted(level: float, d: int, mean_norm: float, var: float) -> float:
    """Upper bound on ||r|| at the given level for r ~ N(mu, var I_d).

    Normally sqrt(var * q) with q the noncentral chi-square quantile.  When
    the noncentrality is too large for the Poisson series, falls back to
    ||mu|| + sqrt(var * q0) with q0 the central quantile, which holds with at
    least the same probability by the triangle inequality.
    """
    nc = mean_norm**2 / var
    try:
        return math.sqrt(var * noncentral_chisq_quantile(level, d, nc))
    except SeriesOverflowError:
        return mean_norm + math.sqrt(var * noncentral_chisq_quantile(level, d, 0.0))


def hp_bounds(
    stats: ResidualStats,
    spec: RidgeSpec,
    x_i_norm: float,
    delta_s: float,
    T: int,
    d: int,
    point_index: Optional[int] = None,
) -> SensitivityProfile:
    """Bounds s_k = eta ||x_i|| sqrt(v_k q_k(1 - delta_s / T)) for k < T.

    Steps with v_k = 0 (always k = 0) have a deterministic residual, so the
    bound is the exact value eta ||x_i|| ||mu_k||.
    """
    _check_T(T)
    if not 0.0 < delta_s < 1.0:
        raise DomainError(f"delta_s must lie in (0, 1), got {delta_s}")
    if stats.T < T:
        raise DomainError(f"residual stats cover {stats.T} steps, need {T}")
    level = 1.0 - delta_s / T
    if level >= 1.0:
        raise NumericalError(f"1 - delta_s/T rounds to 1 (delta_s={delta_s}, T={T})")
    scale = spec.eta * x_i_norm
    bounds = np.empty(T)
    for k in range(T):
        mean_norm = float(np.linalg.norm(stats.mu[k]))
        var = float(stats.v[k])
        if var == 0.0:
            bounds[k] = scale * mean_norm
        else:
            bounds[k] = scale * _quantile_or_shifted(level, d, mean_norm, var)
    return SensitivityProfile(point_index, delta_s, bounds)


def point_profile(spec, data, theta0, sigma_learn, T, delta_s, i) -> SensitivityProfile:
    """residual_stats followed by hp_bounds for one point."""
    stats = residual_stats(spec, data, theta0, sigma_learn, T, i)
    norm = float(np.linalg.norm(data.X[i]))
    return hp_bounds(stats, spec, norm, delta_s, T, data.d, point_index=i)


@dataclasses.dataclass(frozen=True)
class SensitivityMap:
    """Bound matrix (rows follow ``points``, columns k = 0 .. T-1)."""

    points: np.ndarray
    bounds: np.ndarray

    def profile(self, row: int, delta_s: float) -> SensitivityProfile:
        return SensitivityProfile(int(self.points[row]), delta_s, self.bounds[row])


def sensitivity_map(
    spec: RidgeSpec,
    data: Dataset,
    theta0,
    sigma_learn: float,
    T: int,
    delta_s: float,
    points: Optional[Sequence[int]] = None,
    sort: bool = False,
) -> SensitivityMap:
    """High-probability bounds for many points; ``points=None`` means all n.

    With ``sort=True`` rows are ordered by increasing final bound.
    """
    if points is None:
        points = range(data.n)
    points = np.array(list(points), dtype=int)
    if points.size == 0:
        raise DomainError("point set must be nonempty")
    mu, v = residual_stats_many(spec, data, theta0, sigma_learn, T, points)
    norms = np.linalg.norm(data.X[points], axis=1)
    rows = np.empty((points.size, T))
    for r, i in enumerate(points):
        stats = ResidualStats(mu[r], v[r])
        rows[r] = hp_bounds(stats, spec, norms[r], delta_s, T, data.d, int(i)).bounds
    if sort:
        order = np.argsort(rows[:, -1], kind="stable")
        points, rows = points[order], rows[order]
    return SensitivityMap(points, rows)
