"""Empirical privacy audit from two collections of per-run representations.

Group P holds representations of unlearned runs, group Q of retrained runs.
A linear distinguisher is fit on one half of each group and scores the other
half; the held-out scores give an empirical trade-off curve beta(alpha), its
AUC, a least-squares GDP fit and the implied empirical epsilon.  None of
these numbers is a certified guarantee.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import linalg, special

from .accounting import epsilon_gdp
from .errors import DomainError, NumericalError
from .numerics import RngSeed

MIN_RUNS = 10
FIT_ALPHA_RANGE = (0.01, 0.99)
MU_MAX = 20.0


@dataclasses.dataclass(frozen=True)
class RunRepresentations:
    group_p: np.ndarray
    group_q: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.group_p, dtype=float))
        Q = np.atleast_2d(np.asarray(self.group_q, dtype=float))
        if P.shape[1] != Q.shape[1]:
            raise DomainError(
                f"representation dims differ: {P.shape[1]} vs {Q.shape[1]}"
            )
        if P.shape[0] < MIN_RUNS or Q.shape[0] < MIN_RUNS:
            raise DomainError(f"each group needs at least {MIN_RUNS} runs")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
            raise DomainError("representations contain non-finite values")
        object.__setattr__(self, "group_p", P)
        object.__setattr__(self, "group_q", Q)


@dataclasses.dataclass(frozen=True)
class TradeoffCurve:
    alphas: np.ndarray
    betas: np.ndarray
    auc: float


@dataclasses.dataclass(frozen=True)
class GdpFit:
    mu_hat: float
    fit_mse: float
    epsilon_hat: float
    delta_used: float
    saturated: bool = False


def _split(n, rng):
    perm = rng.permutation(n)
    return perm[: n // 2], perm[n // 2 :]


def train_distinguisher(reps: RunRepresentations, split_seed: RngSeed):
    """Fit a ridge-regularized Fisher direction on half the runs.

    Returns held-out projection scores ``(scores_p, scores_q)``.  Larger
    scores point towards group Q.
    """
    train_p, test_p = _split(len(reps.group_p), split_seed.derive(0).generator())
    train_q, test_q = _split(len(reps.group_q), split_seed.derive(1).generator())
    P, Q = reps.group_p[train_p], reps.group_q[train_q]
    diff = Q.mean(axis=0) - P.mean(axis=0)
    centered = np.vstack([P - P.mean(axis=0), Q - Q.mean(axis=0)])
    dof = max(len(centered) - 2, 1)
    S = centered.T @ centered / dof
    q = S.shape[0]
    ridge = 1e-3 * np.trace(S) / q
    if not ridge > 0:
        raise NumericalError("training representations have zero variance")
    try:
        w = linalg.solve(S + ridge * np.eye(q), diff, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise NumericalError("regularized covariance is singular") from exc
    return reps.group_p[test_p] @ w, reps.group_q[test_q] @ w


def tradeoff_curve(scores_p, scores_q, grid_size: int = 1000) -> TradeoffCurve:
    """Empirical trade-off curve of threshold tests on the scores.

    A test rejects P when the score exceeds a threshold; alpha is the
    rejection rate on P and beta the acceptance rate on Q.  Scores are negated
    if needed so that the AUC is at least 0.5.  ``betas`` holds the smallest
    achievable beta with type-I error at most each grid alpha.
    """
    sp = np.sort(np.asarray(scores_p, dtype=float).ravel())
    sq = np.sort(np.asarray(scores_q, dtype=float).ravel())
    if sp.size == 0 or sq.size == 0:
        raise DomainError("score lists must be nonempty")
    if grid_size < 1:
        raise DomainError("grid_size must be positive")

    def roc(sp, sq):
        cuts = np.unique(np.concatenate([sp, sq]))
        alpha = 1.0 - np.searchsorted(sp, cuts, side="right") / sp.size
        beta = np.searchsorted(sq, cuts, side="right") / sq.size
        alpha = np.concatenate([[1.0], alpha])
        beta = np.concatenate([[0.0], beta])
        # walk the ROC with alpha increasing and, at ties, beta decreasing
        order = np.lexsort((-beta, alpha))
        return alpha[order], beta[order]

    alpha, beta = roc(sp, sq)
    auc = float(np.trapezoid(1.0 - beta, alpha))
    if auc < 0.5:
        sp, sq = np.sort(-sp), np.sort(-sq)
        alpha, beta = roc(sp, sq)
        auc = float(np.trapezoid(1.0 - beta, alpha))

    best = np.minimum.accumulate(beta)
    grid = np.linspace(0.0, 1.0, grid_size + 2)[1:-1]
    pos = np.searchsorted(alpha, grid, side="right") - 1
    return TradeoffCurve(grid, best[pos], auc)


def gdp_tradeoff(alphas, mu):
    """beta(alpha) = Phi(Phi^{-1}(1 - alpha) - mu)."""
    return special.ndtr(special.ndtri(1.0 - np.asarray(alphas)) - mu)


def _golden_section(f, lo, hi, tol):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    candidates = [(f(a), a), (fc, c), (fd, d), (f(b), b)]
    return min(candidates)[1]


def fit_gdp(curve: TradeoffCurve, delta: float) -> GdpFit:
    """Least-squares fit of a GDP trade-off curve on alpha in [0.01, 0.99]."""
    lo, hi = FIT_ALPHA_RANGE
    keep = (curve.alphas >= lo) & (curve.alphas <= hi)
    if not np.any(keep):
        raise DomainError("curve has no grid points inside the fit range")
    alphas, betas = curve.alphas[keep], curve.betas[keep]

    def mse(mu):
        return float(np.mean((gdp_tradeoff(alphas, mu) - betas) ** 2))

    if np.all(betas == 0.0):
        mu_hat, saturated = MU_MAX, True
    else:
        mu_hat, saturated = _golden_section(mse, 0.0, MU_MAX, 1e-6), False
    return GdpFit(mu_hat, mse(mu_hat), epsilon_gdp(mu_hat, delta), delta, saturated)


@dataclasses.dataclass(frozen=True)
class AuditResult:
    curve: TradeoffCurve
    fit: GdpFit
    scores_p: np.ndarray
    scores_q: np.ndarray

    @property
    def auc(self) -> float:
        return self.curve.auc


def audit(
    reps: RunRepresentations,
    delta: float,
    split_seed: RngSeed = RngSeed(0),
    grid_size: int = 1000,
) -> AuditResult:
    """Distinguisher, trade-off curve and GDP fit in one call."""
    sp, sq = train_distinguisher(reps, split_seed)
    curve = tradeoff_curve(sp, sq, grid_size)
    return AuditResult(curve, fit_gdp(curve, delta), sp, sq)
