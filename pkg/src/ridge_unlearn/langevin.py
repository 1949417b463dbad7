"""Discrete Langevin dynamics for learning on D and unlearning on D^{-i}.

One step is

    theta <- theta - eta * grad f(theta) + sqrt(2 * eta) * sigma * Xi

with ``Xi`` a (p, d) matrix of standard normals.  Noise is drawn as a
(d, p) block and transposed, so the stream is consumed column by column of
``Xi`` (all p entries of output 0 first, then output 1, ...).
"""

from __future__ import annotations

import dataclasses
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import DomainError, NumericalError
from .numerics import RngSeed
from .ridge import Dataset, RidgeSpec, full_gradient


@dataclasses.dataclass(frozen=True)
class TrajectoryConfig:
    T: int
    K: int
    sigma_learn: float
    sigma_unlearn: float
    theta0: np.ndarray
    seed: RngSeed
    record_every: int = 1

    def __post_init__(self):
        if self.T < 1:
            raise DomainError(f"T must be >= 1, got {self.T}")
        if self.K < 0:
            raise DomainError(f"K must be >= 0, got {self.K}")
        if not self.sigma_learn > 0:
            raise DomainError(f"sigma_learn must be > 0, got {self.sigma_learn}")
        if not self.sigma_unlearn >= 0:
            raise DomainError(f"sigma_unlearn must be >= 0, got {self.sigma_unlearn}")
        if self.record_every < 1:
            raise DomainError("record_every must be >= 1")
        object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float))


@dataclasses.dataclass
class TrajectoryRecord:
    final_theta: np.ndarray
    recorded_iterates: Optional[list] = None
    empirical_sensitivities: Optional[np.ndarray] = None


def _noise(rng: np.random.Generator, p: int, d: int) -> np.ndarray:
    return rng.standard_normal((d, p)).T


def _check_finite(theta, step, phase):
    if not np.all(np.isfinite(theta)):
        raise NumericalError(f"{phase} diverged: non-finite iterate at step {step}")


def run_learn(
    spec: RidgeSpec,
    data: Dataset,
    config: TrajectoryConfig,
    record_for: Optional[int] = None,
    record_iterates: bool = False,
) -> TrajectoryRecord:
    """T Langevin steps on the full dataset.

    When ``record_for`` is an index, the sensitivity
    ``eta * ||x_i|| * ||x_i^T theta_k - y_i||`` is recorded at every pre-step
    iterate theta_0 .. theta_{T-1}.  With ``record_iterates`` every
    ``config.record_every``-th iterate is kept (theta_0 always included).
    """
    theta = config.theta0.copy()
    if theta.shape != (data.p, data.d):
        raise DomainError(f"theta0 must have shape {(data.p, data.d)}, got {theta.shape}")
    rng = config.seed.generator()
    scale = np.sqrt(2.0 * spec.eta) * config.sigma_learn
    sens = None
    if record_for is not None:
        i = data.check_index(record_for)
        x, y = data.X[i], data.Y[i]
        x_scale = spec.eta * np.linalg.norm(x)
        sens = np.empty(config.T)
    iterates = [theta.copy()] if record_iterates else None

    for k in range(config.T):
        if sens is not None:
            sens[k] = x_scale * np.linalg.norm(x @ theta - y)
        theta = spec.M @ theta + spec.eta * spec.B + scale * _noise(rng, data.p, data.d)
        _check_finite(theta, k + 1, "learning")
        if iterates is not None and (k + 1) % config.record_every == 0:
            iterates.append(theta.copy())
    return TrajectoryRecord(theta, iterates, sens)


def run_unlearn(
    spec: RidgeSpec,
    data: Dataset,
    start,
    i: int,
    K: int,
    sigma_unlearn: float,
    seed: RngSeed,
) -> np.ndarray:
    """K Langevin steps on the retain set D^{-i}, starting from ``start``."""
    i = data.check_index(i)
    if K < 0:
        raise DomainError(f"K must be >= 0, got {K}")
    if sigma_unlearn < 0:
        raise DomainError("sigma_unlearn must be >= 0")
    theta = np.array(start, dtype=float)
    if K == 0:
        return theta
    rng = seed.generator()
    scale = np.sqrt(2.0 * spec.eta) * sigma_unlearn
    for k in range(K):
        step = theta - spec.eta * full_gradient(spec, data, theta, exclude=i)
        theta = step + scale * _noise(rng, data.p, data.d)
        _check_finite(theta, k + 1, "unlearning")
    return theta


def run_stream(config: TrajectoryConfig, r: int) -> RngSeed:
    """Stream used by run ``r`` of a sweep: stream_index offset by ``r``."""
    base = config.seed
    return RngSeed(base.seed, (base.stream_index + r) % 2**64)


def empirical_sensitivity_sweep(
    spec: RidgeSpec, data: Dataset, config: TrajectoryConfig, i: int, runs: int
) -> np.ndarray:
    """Sensitivities Delta_{i,k}, k < T, of ``runs`` independent learning runs.

    Row r uses :func:`run_stream` (config, r); row 0 is therefore identical to
    ``run_learn(..., record_for=i)`` with the configured seed.
    """
    if runs < 1:
        raise DomainError("runs must be >= 1")
    out = np.empty((runs, config.T))
    for r in range(runs):
        cfg = dataclasses.replace(config, seed=run_stream(config, r))
        out[r] = run_learn(spec, data, cfg, record_for=i).empirical_sensitivities
    return out


def langevin_batch(
    spec: RidgeSpec,
    data: Dataset,
    start,
    steps: int,
    sigma: float,
    runs: int,
    rng: np.random.Generator,
    exclude: Optional[int] = None,
) -> Iterator[np.ndarray]:
    """Advance ``runs`` independent chains together, yielding every state.

    ``start`` is either one (p, d) matrix shared by all chains or a
    (runs, p, d) array.  Yields the (runs, p, d) state for k = 0 .. steps.
    Meant for Monte Carlo checks; the per-chain noise does not reproduce
    :func:`run_learn` streams.
    """
    start = np.asarray(start, dtype=float)
    theta = np.broadcast_to(start, (runs, data.p, data.d)).copy()
    M, drift = spec.M, spec.eta * spec.B
    if exclude is not None:
        i = data.check_index(exclude)
        x, y = data.X[i], data.Y[i]
        M = M + spec.eta * np.outer(x, x)
        drift = drift - spec.eta * np.outer(x, y)
    scale = np.sqrt(2.0 * spec.eta) * sigma
    yield theta
    for k in range(steps):
        noise = rng.standard_normal((runs, data.d, data.p)).transpose(0, 2, 1)
        theta = np.matmul(M, theta) + drift + scale * noise
        _check_finite(theta, k + 1, "batch chain")
        yield theta


def sensitivities_of(spec: RidgeSpec, data: Dataset, thetas, points: Sequence[int]):
    """eta * ||x_i|| * ||x_i^T theta - y_i|| for each chain (rows) and point (cols)."""
    idx = np.asarray(points, dtype=int)
    Xs, Ys = data.X[idx], data.Y[idx]
    resid = np.einsum("ip,rpd->rid", Xs, thetas) - Ys[None]
    return spec.eta * np.linalg.norm(Xs, axis=1)[None] * np.linalg.norm(resid, axis=2)
