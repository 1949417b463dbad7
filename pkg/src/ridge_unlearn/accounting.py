"""Gaussian-DP accounting along a learn-then-unlearn trajectory.

With T learning steps (pre-step iterates k = 0 .. T-1) followed by K
unlearning steps, a perturbation entering at learning step k is contracted
by the T + K - 1 - k maps that follow it.  The GDP parameter of the final
iterate is

    mu = sum_k c^(T+K-1-k) s_k / sqrt(V_learn + V_unlearn)
    V_learn   = sum_{k<T} 2 eta sigma_learn^2   c^(2 (T+K-1-k))
    V_unlearn = sum_{j<K} 2 eta sigma_unlearn^2 c^(2 j)

and ``mu``-GDP converts to (eps, delta)-DP through

    delta(eps) = Phi(-eps/mu + mu/2) - exp(eps) Phi(-eps/mu - mu/2).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from .errors import ContractError, DomainError
from .numerics import find_root_monotone, std_normal_cdf, std_normal_logcdf, std_normal_quantile
from .sensitivity import SensitivityProfile

LOG_TOL = 1e-9
# beyond this mu the two Phi terms cancel below double precision
HUGE_MU = 1e6


@dataclasses.dataclass(frozen=True)
class PrivacyBudget:
    """Target (epsilon, delta) and its split delta = delta_s + delta_m.

    ``delta_s`` defaults to delta / 2.
    """

    epsilon: float
    delta: float
    delta_s: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.delta_s is None:
            object.__setattr__(self, "delta_s", 0.5 * self.delta)
        if not 0.0 < self.delta_s < self.delta:
            raise DomainError(
                f"delta_s must lie in (0, delta={self.delta}), got {self.delta_s}"
            )

    @property
    def delta_m(self) -> float:
        return self.delta - self.delta_s


@dataclasses.dataclass(frozen=True)
class AccountingInputs:
    bounds: SensitivityProfile
    c: float
    eta: float
    K: int
    sigma_learn: float

    def __post_init__(self):
        if not 0.0 <= self.c < 1.0:
            raise ContractError(f"contraction factor must lie in [0, 1), got {self.c}")
        if self.K < 0:
            raise DomainError(f"K must be >= 0, got {self.K}")
        if not self.sigma_learn > 0 or not self.eta > 0:
            raise DomainError("sigma_learn and eta must be positive")

    @property
    def T(self) -> int:
        return self.bounds.T

    def _learn_weights(self):
        exponents = self.T + self.K - 1 - np.arange(self.T)
        return self.c ** exponents.astype(float)

    def numerator(self) -> float:
        return float(np.dot(self._learn_weights(), self.bounds.bounds))

    def std_learn(self) -> float:
        """sqrt(V_learn), formed without squaring tiny weights."""
        w = self._learn_weights()
        top = w.max()
        if top == 0.0:
            return 0.0
        return float(math.sqrt(2.0 * self.eta) * self.sigma_learn * top * np.linalg.norm(w / top))

    def v_learn(self) -> float:
        return self.std_learn() ** 2

    def unlearn_weight(self) -> float:
        """V_unlearn / sigma_unlearn^2."""
        j = np.arange(self.K, dtype=float)
        return float(2.0 * self.eta * np.sum(self.c ** (2.0 * j)))


@dataclasses.dataclass(frozen=True)
class CalibrationResult:
    sigma_unlearn: float
    mu_achieved: float
    epsilon_achieved: float
    point_index: Optional[int] = None


def gdp_mu(inputs: AccountingInputs, sigma_unlearn: float) -> float:
    if sigma_unlearn < 0:
        raise DomainError("sigma_unlearn must be >= 0")
    num = inputs.numerator()
    if num == 0.0:
        return 0.0
    std = math.hypot(inputs.std_learn(), sigma_unlearn * math.sqrt(inputs.unlearn_weight()))
    if std == 0.0:
        return math.inf
    return num / std


def _log_delta(mu: float, epsilon: float) -> float:
    if mu == 0.0:
        return -math.inf
    a = -epsilon / mu + 0.5 * mu
    log_first = std_normal_logcdf(a)
    log_second = epsilon + std_normal_logcdf(a - mu)
    if log_second >= log_first:
        return -math.inf
    return log_first + math.log(-math.expm1(log_second - log_first))


def gdp_to_dp_delta(mu: float, epsilon: float) -> float:
    """delta such that mu-GDP implies (epsilon, delta)-DP."""
    if mu < 0 or epsilon < 0:
        raise DomainError("mu and epsilon must be nonnegative")
    if math.isinf(mu):
        return 1.0
    if mu > HUGE_MU:
        return float(std_normal_cdf(-epsilon / mu + 0.5 * mu))
    return min(1.0, max(0.0, math.exp(_log_delta(mu, epsilon))))


def epsilon_gdp(mu: float, delta: float) -> float:
    """Smallest epsilon >= 0 with gdp_to_dp_delta(mu, epsilon) <= delta."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if mu < 0:
        raise DomainError("mu must be nonnegative")
    if math.isinf(mu):
        return math.inf
    if mu > HUGE_MU:
        # delta(eps) <= Phi(-eps/mu + mu/2), so this eps is always sufficient
        eps = mu * (0.5 * mu - std_normal_quantile(delta))
        return eps + 4.0 * math.ulp(eps)  # absorb rounding of the product
    target = math.log(delta)
    if _log_delta(mu, 0.0) <= target:
        return 0.0
    return find_root_monotone(
        lambda e: _log_delta(mu, e), target, (0.0, max(1.0, mu)), LOG_TOL,
        domain=(0.0, math.inf),
    )


def mu_for_budget(epsilon: float, delta: float) -> float:
    """Largest mu whose GDP guarantee implies (epsilon, delta)-DP."""
    if not 0.0 < delta < 1.0 or not epsilon >= 0:
        raise DomainError("need epsilon >= 0 and delta in (0, 1)")
    return find_root_monotone(
        lambda m: _log_delta(m, epsilon), math.log(delta), (0.0, 1.0), LOG_TOL,
        domain=(0.0, math.inf),
    )


def calibrate_sigma(
    inputs: AccountingInputs, budget: PrivacyBudget, point_index: Optional[int] = None
) -> CalibrationResult:
    """Smallest sigma_unlearn with epsilon_gdp(mu(sigma), delta_m) <= epsilon.

    ``mu(sigma)`` is strictly decreasing, so the condition is equivalent to
    ``mu(sigma) <= mu_max`` where ``mu_max`` is the GDP level matching the
    budget; that equation is solved for sigma in closed form and then checked
    forward.
    """
    if inputs.K < 1:
        raise ContractError("calibration needs an unlearning horizon K >= 1")
    if point_index is None:
        point_index = inputs.bounds.point_index
    delta_m = budget.delta_m

    def result(sigma):
        mu = gdp_mu(inputs, sigma)
        return CalibrationResult(sigma, mu, epsilon_gdp(mu, delta_m), point_index)

    num = inputs.numerator()
    std_learn = inputs.std_learn()
    mu_max = mu_for_budget(budget.epsilon, delta_m)
    needed = num / mu_max  # total std required
    if needed <= std_learn:
        return result(0.0)
    extra = needed * math.sqrt(1.0 - (std_learn / needed) ** 2)
    sigma = extra / math.sqrt(inputs.unlearn_weight())
    res = result(sigma)
    bump = 1e-12
    while res.epsilon_achieved > budget.epsilon:
        sigma *= 1.0 + bump
        bump *= 4.0
        res = result(sigma)
    return res


def uniform_baseline_profile(C: float, eta: float, T: int) -> SensitivityProfile:
    """Constant profile s_k = eta * C, the oracle worst-case comparator."""
    if not C > 0:
        raise DomainError(f"C must be positive, got {C}")
    if T < 1:
        raise DomainError("T must be >= 1")
    return SensitivityProfile(None, None, np.full(T, eta * C))
