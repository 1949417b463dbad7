"""Scalar special functions, monotone root finding and seeded Gaussian streams.

The noncentral chi-square CDF is evaluated as a Poisson mixture of central
chi-square CDFs.  Only a window of Poisson indices around the mode is kept,
chosen so the discarded Poisson mass is below ``POISSON_TAIL``.  Central CDFs
inside the window come from a single regularized incomplete gamma call plus
the downward recurrence

    P(a + 1, y) = P(a, y) - exp(a log y - y - lgamma(a + 1)),

which keeps the cost per evaluation at one ``exp`` per window term.  This
matters because the quantile is found by plain bisection on the CDF.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np
from scipy import special

from .errors import ContractError, DomainError, NoRootError, SeriesOverflowError

POISSON_TAIL = 1e-12
MAX_SERIES_TERMS = 1 << 22
_DIRECT_GAMMA_TERMS = 64
_X_REL_TOL = 1e-12


def std_normal_cdf(x):
    """Standard normal CDF.  Accepts scalars or arrays of finite values."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"std_normal_cdf needs finite input, got {x!r}")
    out = special.ndtr(arr)
    return float(out) if out.ndim == 0 else out


def std_normal_logcdf(x):
    """log Phi(x), accurate deep into the lower tail."""
    out = special.log_ndtr(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0.0) | ~(arr < 1.0)):
        raise DomainError(f"quantile level must lie in (0, 1), got {p!r}")
    out = special.ndtri(arr)
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# Noncentral chi-square
# ----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class NoncentralChiSquareParams:
    """Degrees of freedom and noncentrality of a noncentral chi-square law."""

    dof: int
    noncentrality: float

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 1:
            raise DomainError(f"dof must be a positive integer, got {self.dof}")
        if not math.isfinite(self.noncentrality) or self.noncentrality < 0:
            raise DomainError(
                f"noncentrality must be finite and >= 0, got {self.noncentrality}"
            )

    def cdf(self, x: float) -> float:
        return noncentral_chisq_cdf(x, self)

    def quantile(self, p: float) -> float:
        return noncentral_chisq_quantile(p, self)


class _PoissonMixture:
    """Truncated Poisson(nc/2) weights paired with central chi-square CDFs."""

    def __init__(self, dof: int, noncentrality: float):
        self.a = 0.5 * dof
        half = 0.5 * noncentrality
        if half == 0.0:
            self.j = np.zeros(1)
            self.w = np.ones(1)
        else:
            mode = math.floor(half)
            width = int(8.0 * math.sqrt(half)) + 8
            while True:
                lo = max(0, mode - width)
                hi = mode + width
                if hi - lo + 1 > MAX_SERIES_TERMS:
                    raise SeriesOverflowError(
                        f"noncentrality {noncentrality:.6g} needs more than "
                        f"{MAX_SERIES_TERMS} Poisson terms"
                    )
                # discarded mass on both sides of [lo, hi]
                left = special.pdtr(lo - 1, half) if lo > 0 else 0.0
                right = special.pdtrc(hi, half)
                if left + right < POISSON_TAIL:
                    break
                width *= 2
            j = np.arange(lo, hi + 1, dtype=float)
            logw = j * math.log(half) - half - special.gammaln(j + 1.0)
            self.j = j
            self.w = np.exp(logw)
        self.lgam = special.gammaln(self.a + self.j + 1.0)

    def cdf(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        y = 0.5 * x
        shapes = self.a + self.j
        if self.j.size <= _DIRECT_GAMMA_TERMS:
            central = special.gammainc(shapes, y)
        else:
            central = np.empty_like(shapes)
            central[0] = special.gammainc(shapes[0], y)
            steps = np.exp(shapes[:-1] * math.log(y) - y - self.lgam[:-1])
            central[1:] = central[0] - np.cumsum(steps)
            np.clip(central, 0.0, 1.0, out=central)
        return float(min(1.0, max(0.0, np.dot(self.w, central))))


def _as_params(params, noncentrality=None) -> NoncentralChiSquareParams:
    if isinstance(params, NoncentralChiSquareParams):
        return params
    return NoncentralChiSquareParams(int(params), float(noncentrality))


def noncentral_chisq_cdf(x: float, params, noncentrality: float | None = None) -> float:
    """P(chi'^2_dof(noncentrality) <= x).

    ``params`` is either a :class:`NoncentralChiSquareParams` or the degrees of
    freedom, in which case ``noncentrality`` must be given as well.
    """
    params = _as_params(params, noncentrality)
    if not math.isfinite(x) or x < 0:
        raise DomainError(f"x must be finite and >= 0, got {x}")
    return _PoissonMixture(params.dof, params.noncentrality).cdf(x)


def noncentral_chisq_quantile(
    p: float, params, noncentrality: float | None = None, tol: float = 1e-10
) -> float:
    """Smallest x (to bisection accuracy) with CDF(x) >= p.

    Bisection stops once CDF(hi) - p <= ``tol`` and the bracket is narrower
    than 1e-12 relative, so tiny ``p`` still yields an accurate x.

    The returned point is the upper end of the final bisection bracket, so the
    CDF there is never below ``p`` by more than the series truncation error.
    """
    params = _as_params(params, noncentrality)
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {p}")
    mix = _PoissonMixture(params.dof, params.noncentrality)
    dof, nc = params.dof, params.noncentrality
    lo = 0.0
    hi = dof + nc + 10.0 * math.sqrt(2.0 * dof + 4.0 * nc)
    f_hi = mix.cdf(hi)
    expansions = 0
    while f_hi < p:
        lo, hi = hi, 2.0 * hi
        f_hi = mix.cdf(hi)
        expansions += 1
        if expansions > 200:
            raise NoRootError(f"could not bracket the {p}-quantile")
    for _ in range(400):
        if f_hi - p <= tol and hi - lo <= _X_REL_TOL * (1.0 + hi):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = mix.cdf(mid)
        if f_mid < p:
            lo = mid
        else:
            hi, f_hi = mid, f_mid
    return hi


# ----------------------------------------------------------------------------
# Root finding
# ----------------------------------------------------------------------------


def find_root_monotone(
    f: Callable[[float], float],
    target: float,
    bracket: tuple[float, float],
    tol: float,
    domain: tuple[float, float] = (-math.inf, math.inf),
    max_expansions: int = 200,
    max_iter: int = 2000,
) -> float:
    """Solve ``f(x) = target`` for a monotone ``f`` by bisection.

    If ``target`` is not enclosed by ``f`` at the bracket endpoints the
    bracket is widened geometrically on the side whose value is closer to
    the target, never leaving ``domain``.  Works for increasing and
    decreasing ``f``.

    Raises:
        NoRootError: the bracket could not be expanded to enclose ``target``.
        ContractError: a midpoint value fell outside the endpoint values,
            i.e. ``f`` is not monotone on the bracket.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ContractError(f"bracket must satisfy lo < hi, got {bracket}")
    if tol <= 0:
        raise ContractError("tol must be positive")
    f_lo, f_hi = f(lo), f(hi)

    def encloses(a, b):
        return min(a, b) - tol <= target <= max(a, b) + tol

    expansions = 0
    while not encloses(f_lo, f_hi):
        if expansions >= max_expansions:
            raise NoRootError(
                f"target {target} not reached after {max_expansions} expansions; "
                f"f in [{min(f_lo, f_hi)}, {max(f_lo, f_hi)}] on [{lo}, {hi}]"
            )
        expansions += 1
        width = hi - lo
        if abs(f_hi - target) <= abs(f_lo - target) and hi < domain[1]:
            lo, f_lo = hi, f_hi
            hi = min(hi + 2.0 * width, domain[1])
            f_hi = f(hi)
        elif lo > domain[0]:
            hi, f_hi = lo, f_lo
            lo = max(lo - 2.0 * width, domain[0])
            f_lo = f(lo)
        else:
            raise NoRootError(f"target {target} lies outside f(domain)")

    if abs(f_lo - target) <= tol:
        return lo
    if abs(f_hi - target) <= tol:
        return hi
    increasing = f_hi > f_lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if not min(f_lo, f_hi) - tol <= f_mid <= max(f_lo, f_hi) + tol:
            raise ContractError(
                f"f is not monotone on [{lo}, {hi}]: f(mid)={f_mid} outside "
                f"[{min(f_lo, f_hi)}, {max(f_lo, f_hi)}]"
            )
        if abs(f_mid - target) <= tol or mid <= lo or mid >= hi:
            return mid
        if (f_mid < target) == increasing:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------------
# Random streams
# ----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class RngSeed:
    """Identifies one reproducible noise stream.

    Streams come from numpy's PCG64 seeded through ``SeedSequence(seed,
    spawn_key=(stream_index,))``.  Distinct stream indices give statistically
    independent streams; sequences are bit-exact for a given numpy build.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_index"):
            value = getattr(self, name)
            if not 0 <= value < 2**64:
                raise DomainError(f"{name} must be a 64-bit unsigned int, got {value}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(seq))

    def derive(self, *keys: int) -> "RngSeed":
        """A new stream index deterministically folded from this one and ``keys``."""
        seq = np.random.SeedSequence([self.stream_index, *keys, 0x5EED])
        return RngSeed(self.seed, int(seq.generate_state(1, np.uint64)[0]))


def gaussian_stream(seed: RngSeed, count: int) -> np.ndarray:
    """``count`` standard normal draws from the stream identified by ``seed``."""
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    return seed.generator().standard_normal(count)
