"""Multi-output ridge regression: objective, gradients and exact solutions.

The objective is

    f_D(theta) = sum_j 0.5 * ||x_j^T theta - y_j||^2 + 0.5 * lam * ||theta||_F^2

with theta of shape (p, d).  Its gradient is ``A theta - B`` with
``A = X^T X + lam I`` and ``B = X^T Y``; dropping point i subtracts the rank
one terms ``x_i x_i^T`` and ``x_i y_i^T``.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import linalg, optimize

from .errors import DomainError, NumericalError

DENSE_EIGH_MAX_P = 512


@dataclasses.dataclass(frozen=True)
class Dataset:
    """Feature matrix ``X`` (n, p) and target matrix ``Y`` (n, d)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Y = np.array(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2:
            raise DomainError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != Y.shape[0]:
            raise DomainError(
                f"row count mismatch: X has {X.shape[0]} rows, Y has {Y.shape[0]}"
            )
        if X.shape[0] < 1 or X.shape[1] < 1 or Y.shape[1] < 1:
            raise DomainError("dataset dimensions must be positive")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DomainError("dataset contains non-finite entries")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    def check_index(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"point index {i} out of range for n={self.n}")
        return int(i)

    def without(self, i: int) -> "Dataset":
        """The leave-one-out dataset D^{-i}."""
        i = self.check_index(i)
        keep = np.arange(self.n) != i
        return Dataset(self.X[keep], self.Y[keep])

    def with_bias(self) -> "Dataset":
        """Append a constant feature column."""
        return Dataset(np.hstack([self.X, np.ones((self.n, 1))]), self.Y)


@dataclasses.dataclass(frozen=True)
class RidgeSpec:
    """Precomputed matrices and contraction constants for one dataset."""

    lam: float
    A: np.ndarray
    M: np.ndarray
    B: np.ndarray
    m: float
    L: float
    eta: float
    c: float


def power_iteration(A, tol=1e-10, max_iter=10_000, seed=0):
    """Largest eigenvalue of a symmetric positive semidefinite matrix."""
    v = np.random.default_rng(seed).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A @ v
        new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(new - est) <= tol * abs(new):
            return new
        est = new
    raise NumericalError(f"power iteration did not converge in {max_iter} steps")


def inverse_iteration(A, tol=1e-10, max_iter=10_000, seed=1):
    """Smallest eigenvalue of a symmetric positive definite matrix (shift 0)."""
    try:
        factor = linalg.cho_factor(A)
    except linalg.LinAlgError as exc:
        raise NumericalError("matrix is not numerically positive definite") from exc
    v = np.random.default_rng(seed).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    est = np.inf
    for _ in range(max_iter):
        w = linalg.cho_solve(factor, v)
        v = w / np.linalg.norm(w)
        new = float(v @ (A @ v))
        if abs(new - est) <= tol * abs(new):
            return new
        est = new
    raise NumericalError(f"inverse iteration did not converge in {max_iter} steps")


def build_spec(data: Dataset, lam: float, conservative_m: bool = False) -> RidgeSpec:
    """Form A, M, B and the eigen extremes that fix eta = 1/L and c = 1 - m/L.

    With ``conservative_m`` the strong convexity constant is taken as ``lam``
    instead of the computed smallest eigenvalue of ``A``.
    """
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    p = data.p
    A = data.X.T @ data.X + lam * np.eye(p)
    A = 0.5 * (A + A.T)
    B = data.X.T @ data.Y
    if p <= DENSE_EIGH_MAX_P:
        evals = linalg.eigvalsh(A)
        m, L = float(evals[0]), float(evals[-1])
    else:
        L = power_iteration(A)
        m = inverse_iteration(A)
    if not m > 0 or not np.isfinite(L) or m / L < 1e3 * np.finfo(float).eps:
        raise NumericalError(f"A is numerically singular (m={m}, L={L})")
    if conservative_m:
        m = float(lam)
    eta = 1.0 / L
    c = 1.0 - m / L
    M = np.eye(p) - eta * A
    for arr in (A, M, B):
        arr.setflags(write=False)
    return RidgeSpec(lam=float(lam), A=A, M=M, B=B, m=m, L=L, eta=eta, c=c)


def _downdated_min_eig(evals, z, tol):
    """Smallest eigenvalue of diag(evals) - z z^T, with evals ascending.

    Writes t = evals[0] - s; for s > 0 the eigenvalue solves the secular
    equation sum_j z_j^2 / (evals_j - evals[0] + s) = 1, whose left side
    decreases in s and is <= 1 at s = ||z||^2.  The root is rounded towards
    larger s so the returned value never exceeds the true eigenvalue.
    """
    zz = z * z
    hi = float(zz.sum())
    if hi == 0.0:
        return float(evals[0])
    gaps = evals - evals[0]

    def excess(s):
        return float(np.sum(zz / (gaps + s))) - 1.0

    lo = tol * hi
    if excess(lo) <= 0.0:
        return float(evals[0]) - lo
    if excess(hi) >= 0.0:
        return float(evals[0]) - hi
    xtol = tol * hi
    s = optimize.brentq(excess, lo, hi, xtol=xtol)
    return float(evals[0]) - min(s + xtol, hi)


def retain_contractions(spec: RidgeSpec, data: Dataset, points=None) -> np.ndarray:
    """Contraction factor valid for both f_D and f_{D^{-i}}, per point.

    Deleting x_i lowers the Hessian to A - x_i x_i^T, whose smallest
    eigenvalue can be well below that of A, so the map on the retain set
    contracts only by 1 - eta * lambda_min(A - x_i x_i^T).  That eigenvalue is
    never below lam; with the conservative m = lam this returns spec.c.
    """
    idx = np.arange(data.n) if points is None else np.array(
        [data.check_index(i) for i in points], dtype=int)
    if spec.m <= spec.lam:
        return np.full(idx.size, spec.c)
    p = data.p
    if p <= DENSE_EIGH_MAX_P:
        evals, vecs = linalg.eigh(spec.A)
        Z = data.X[idx] @ vecs
        mins = np.array([_downdated_min_eig(evals, z, 1e-13) for z in Z])
    else:
        mins = np.array([
            inverse_iteration(spec.A - np.outer(data.X[i], data.X[i])) for i in idx
        ])
    m_i = np.clip(mins, spec.lam, spec.m)
    return 1.0 - spec.eta * m_i


def full_gradient(spec: RidgeSpec, data: Dataset, theta, exclude: int | None = None):
    """Gradient of f_D, or of f_{D^{-i}} when ``exclude=i``."""
    theta = np.asarray(theta, dtype=float)
    grad = spec.A @ theta - spec.B
    if exclude is not None:
        i = data.check_index(exclude)
        x = data.X[i]
        grad -= np.outer(x, x @ theta - data.Y[i])
    return grad


def pointwise_gradient_norm(data: Dataset, theta, i: int) -> float:
    """Frobenius norm of grad l(theta; x_i, y_i) = x_i r_i^T, i.e. ||x_i|| ||r_i||."""
    i = data.check_index(i)
    x = data.X[i]
    r = x @ np.asarray(theta, dtype=float) - data.Y[i]
    return float(np.linalg.norm(x) * np.linalg.norm(r))


def exact_solution(spec: RidgeSpec, data: Dataset | None = None) -> np.ndarray:
    """The ridge minimizer A^{-1} B via a Cholesky solve."""
    try:
        theta = linalg.cho_solve(linalg.cho_factor(spec.A), spec.B)
    except linalg.LinAlgError as exc:
        raise NumericalError("Cholesky factorization of A failed") from exc
    resid = np.linalg.norm(spec.A @ theta - spec.B)
    if resid > 1e-8 * max(np.linalg.norm(spec.B), 1.0):
        raise NumericalError(f"ridge solve residual too large: {resid:.3e}")
    return theta


def loo_prediction(spec: RidgeSpec, data: Dataset, i: int) -> np.ndarray:
    """Leave-one-out prediction for point i by the Sherman-Morrison shortcut.

    y_i - yhat_i^{(-i)} = (y_i - yhat_i) / (1 - H_ii),  H = X A^{-1} X^T,

    i.e. yhat_i^{(-i)} = yhat_i - H_ii (y_i - yhat_i) / (1 - H_ii).
    """
    i = data.check_index(i)
    x = data.X[i]
    factor = linalg.cho_factor(spec.A)
    h_ii = float(x @ linalg.cho_solve(factor, x))
    if h_ii >= 1.0 - 1e-12:
        raise NumericalError(f"leverage H_ii = {h_ii} too close to 1 for point {i}")
    yhat = x @ linalg.cho_solve(factor, spec.B)
    return yhat - h_ii * (data.Y[i] - yhat) / (1.0 - h_ii)
