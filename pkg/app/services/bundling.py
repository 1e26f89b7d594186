import math
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.stats import norm

from app.core.exception import AppException, MarketInputError
from app.core.logger import setup_logger
from app.utils.params import load_params

params = load_params()
bundling_params = params.get("bundling_params", {})

log_file_path = bundling_params.get("log_file_path", "bundling.log")
root_tolerance = float(bundling_params.get("root_tolerance", 1e-10))
bracket_half_width = float(bundling_params.get("bracket_half_width", 10.0))

logger = setup_logger("Bundling", log_file_path)

# Profits closer than this are treated as ties.
PROFIT_TIE = 1e-12


@dataclass(frozen=True)
class NormalDemand:
    """
    Buyer value ``mu + sigma * Z`` for a standard normal ``Z``.

    Typical usage example:
        demand = NormalDemand(1.0, 4.41)
        demand.rev  # close to 1
    """

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise MarketInputError(f"sigma must be nonnegative, got {self.sigma}")

    @property
    def alpha(self) -> float:
        return math.inf if self.sigma == 0 else self.mu / self.sigma

    @property
    def z_star(self) -> float:
        return optimal_normalized_price(self.alpha)

    @property
    def rev(self) -> float:
        return normal_rev(self.mu, self.sigma)[0]

    @property
    def price(self) -> float:
        return normal_rev(self.mu, self.sigma)[1]

    @property
    def optimal_demand(self) -> float:
        """Sale probability at the optimal price, F[z* - alpha]."""
        return rev_gradient_mu(self.mu, self.sigma)


@dataclass(frozen=True)
class SubexponentialParams:
    """Tail parameters with E[exp(l Z)] <= exp(l^2 gamma^2 / 2) for |l| < 1/xi."""

    gamma: float
    xi: float

    def __post_init__(self):
        if self.gamma <= 0 or self.xi <= 0:
            raise MarketInputError(f"gamma and xi must be positive, got ({self.gamma}, {self.xi})")


NORMAL_TAILS = SubexponentialParams(gamma=1.0, xi=1.0)


@dataclass(frozen=True)
class UniformPrior:
    """Seller quality prior U[lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.hi < self.lo:
            raise MarketInputError(f"empty prior support [{self.lo}, {self.hi}]")

    @property
    def degenerate(self) -> bool:
        return self.hi == self.lo

    def cdf(self, mu: float) -> float:
        if self.degenerate:
            return 1.0 if mu >= self.lo else 0.0
        return min(max((mu - self.lo) / (self.hi - self.lo), 0.0), 1.0)

    def pdf(self, mu: float) -> float:
        if self.degenerate or mu < self.lo or mu > self.hi:
            return 0.0
        return 1.0 / (self.hi - self.lo)

    def ppf(self, q):
        return self.lo + np.asarray(q, dtype=float) * (self.hi - self.lo)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.degenerate:
            return np.full(size, self.lo, dtype=float)
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class BundlingMarket:
    """
    Sellers with qualities ``mu_i`` facing buyers with normal dispersion ``sigma``.

    ``quality_mix`` is ``(N_L, mu_L, mu_H)`` for two-quality markets; when set,
    every quality must lie in ``[mu_L, mu_H]``.
    """

    qualities: Tuple[float, ...]
    sigma: float
    prior: Optional[UniformPrior] = None
    capacity: int = 0
    quality_mix: Optional[Tuple[int, float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "qualities", tuple(float(mu) for mu in self.qualities))
        if self.sigma < 0:
            raise MarketInputError(f"sigma must be nonnegative, got {self.sigma}")
        if self.capacity < 0:
            raise MarketInputError(f"capacity must be nonnegative, got {self.capacity}")
        if any(mu <= 0 for mu in self.qualities):
            raise MarketInputError("seller qualities must be positive")
        if self.quality_mix is not None:
            n_low, mu_low, mu_high = self.quality_mix
            if not 0 < mu_low <= mu_high:
                raise MarketInputError(f"need 0 < mu_L <= mu_H, got ({mu_low}, {mu_high})")
            if not 0 <= n_low <= len(self.qualities):
                raise MarketInputError(f"N_L={n_low} outside 0..{len(self.qualities)}")
            if any(mu < mu_low or mu > mu_high for mu in self.qualities):
                raise MarketInputError("qualities must lie in [mu_L, mu_H]")

    @property
    def n(self) -> int:
        return len(self.qualities)

    @classmethod
    def two_quality(cls, n: int, n_low: int, mu_low: float, mu_high: float, sigma: float, capacity: int = 0):
        qualities = [mu_low] * n_low + [mu_high] * (n - n_low)
        return cls(tuple(qualities), sigma, capacity=capacity, quality_mix=(n_low, mu_low, mu_high))


@dataclass(frozen=True)
class BundleWindow:
    """Sellers ``start..stop-1`` of the quality-sorted market, bundled together."""

    start: int
    stop: int
    qualities: Tuple[float, ...]
    revenue: float
    payment: float
    profit: float

    @property
    def empty(self) -> bool:
        return self.stop <= self.start


@dataclass(frozen=True)
class RevenueWitness:
    """One instance where the bundle revenue set function breaks a property."""

    prop: str
    lhs: float
    rhs: float
    relation: str
    sigma: float
    qualities: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def holds(self) -> bool:
        return self.lhs < self.rhs if self.relation == "<" else self.lhs > self.rhs


def _foc(z: float, alpha: float) -> float:
    return norm.sf(z - alpha) - z * norm.pdf(z - alpha)


def optimal_normalized_price(alpha: float) -> float:
    """
    Root z* of F[z - alpha] = z f(z - alpha); the optimal price is sigma * z*.

    Brent's method on ``[alpha - w, alpha + w]``; when the root is not bracketed
    the revenue curve ``z F[z - alpha]`` is maximised by bounded golden search.
    """
    if math.isinf(alpha):
        return alpha
    lo = max(0.0, alpha - bracket_half_width)
    hi = alpha + bracket_half_width
    if _foc(lo, alpha) > 0 > _foc(hi, alpha):
        return brentq(_foc, lo, hi, args=(alpha,), xtol=root_tolerance, rtol=root_tolerance)

    logger.debug("FOC root not bracketed for alpha=%s; using bounded search", alpha)
    result = minimize_scalar(
        lambda z: -z * norm.sf(z - alpha),
        bounds=(0.0, max(hi, 1.0)),
        method="bounded",
        options={"xatol": root_tolerance},
    )
    return float(result.x)


def normal_rev(mu: float, sigma: float) -> Tuple[float, float]:
    """Rev and p* without input checks; priors may put mass at mu = 0."""
    if sigma == 0:
        return max(mu, 0.0), max(mu, 0.0)
    z = optimal_normalized_price(mu / sigma)
    return float(sigma * z * norm.sf(z - mu / sigma)), float(sigma * z)


def monopoly_rev(mu: float, sigma: float) -> Tuple[float, float]:
    """
    Optimal monopoly revenue and price against buyer value ``mu + sigma * Z``.

    Args:
        mu (float): Quality, strictly positive.
        sigma (float): Dispersion, nonnegative.

    Returns:
        Tuple[float, float]: ``(rev, p_star)``; ``(mu, mu)`` when ``sigma`` is 0.

    Raises:
        MarketInputError: On nonpositive ``mu`` or negative ``sigma``.
    """
    if mu <= 0:
        raise MarketInputError(f"quality must be positive, got {mu}")
    if sigma < 0:
        raise MarketInputError(f"sigma must be nonnegative, got {sigma}")
    return normal_rev(float(mu), float(sigma))


def rev_gradient_mu(mu: float, sigma: float) -> float:
    """d Rev / d mu, which equals the optimal demand F[(p* - mu) / sigma]."""
    if sigma == 0:
        return 1.0 if mu > 0 else 0.0
    alpha = mu / sigma
    return float(norm.sf(optimal_normalized_price(alpha) - alpha))


def alpha_zero() -> float:
    """The alpha at which the optimal normalized price z*(alpha) - alpha crosses zero."""
    return float(brentq(lambda a: optimal_normalized_price(a) - a, 0.1, 5.0, xtol=root_tolerance))


def bundle_rev(qualities: Sequence[float], sigma: float) -> float:
    """Revenue from selling ``qualities`` as one bundle: Rev(sum mu, sqrt(|S|) sigma)."""
    qualities = list(qualities)
    if not qualities:
        raise MarketInputError("cannot price an empty bundle")
    return monopoly_rev(float(sum(qualities)), math.sqrt(len(qualities)) * sigma)[0]


def bundle_profit(qualities: Sequence[float], sigma: float) -> float:
    """Bundle revenue minus each member's outside option Rev(mu_i, sigma); 0 for no sellers."""
    qualities = list(qualities)
    if not qualities:
        return 0.0
    return bundle_rev(qualities, sigma) - sum(monopoly_rev(mu, sigma)[0] for mu in qualities)


def complete_info_optimal_bundle(market: BundlingMarket) -> BundleWindow:
    """
    Most profitable contiguous window of quality-sorted sellers.

    Every window ``[i, j)`` is priced, plus the empty bundle; ties keep the
    earlier (shorter, lower) window and an all-nonpositive market returns the
    empty window.

    Typical usage example:
        market = BundlingMarket((0.1, 1.1, 2.1, 3.1), sigma=1.0)
        window = complete_info_optimal_bundle(market)
        window.qualities  # (1.1, 2.1, 3.1)
    """
    try:
        qualities = sorted(market.qualities)
        own = [monopoly_rev(mu, market.sigma)[0] for mu in qualities]
        prefix_mu = np.concatenate(([0.0], np.cumsum(qualities)))
        prefix_rev = np.concatenate(([0.0], np.cumsum(own)))

        best = BundleWindow(0, 0, (), 0.0, 0.0, 0.0)
        for start in range(len(qualities)):
            for stop in range(start + 1, len(qualities) + 1):
                revenue = monopoly_rev(
                    float(prefix_mu[stop] - prefix_mu[start]), math.sqrt(stop - start) * market.sigma
                )[0]
                payment = float(prefix_rev[stop] - prefix_rev[start])
                if revenue - payment > best.profit + PROFIT_TIE:
                    best = BundleWindow(
                        start, stop, tuple(qualities[start:stop]), revenue, payment, revenue - payment
                    )

        logger.info(
            "Optimal bundle over %d sellers: window [%d, %d) profit %.6f",
            len(qualities), best.start, best.stop, best.profit,
        )
        return best

    except MarketInputError:
        raise
    except Exception as e:
        logger.error(f"Error computing the optimal bundle: {e}")
        raise AppException(e, sys)


def t0_threshold(mu_low: float, mu_high: float) -> int:
    """Smallest integer t >= 2 with t / (sqrt(t - 1) + 1) > mu_H / mu_L."""
    if not 0 < mu_low < mu_high:
        raise MarketInputError(f"need 0 < mu_L < mu_H, got ({mu_low}, {mu_high})")
    ratio = mu_high / mu_low
    t = 2
    while t / (math.sqrt(t - 1) + 1) <= ratio:
        t += 1
    return t


def rev_deviation_bound(
    C: float, sigma: float, weights: Sequence[float], tails: SubexponentialParams = NORMAL_TAILS
) -> float:
    """
    Upper bound on |Rev(C + sigma * sum a_i Z_i) - C| for sub-exponential Z_i.

    With ``A = sum a_i^2`` the bound is the largest of
    sigma*gamma*e^(-1/2)*sqrt(A), 8*sigma*xi/(3e), sqrt(2)*sigma*sqrt(A)
    and 2*sigma^(2/3)*(C*A)^(1/3).
    """
    a = np.asarray(list(weights), dtype=float)
    if C <= 0:
        raise MarketInputError(f"C must be positive, got {C}")
    if np.any((a < 0) | (a > 1)):
        raise MarketInputError("weights must lie in [0, 1]")
    A = float(np.sum(a ** 2))
    if A == 0 or sigma == 0:
        return 0.0
    return max(
        sigma * tails.gamma * math.exp(-0.5) * math.sqrt(A),
        8 * sigma * tails.xi / (3 * math.e),
        math.sqrt(2) * sigma * math.sqrt(A),
        2 * sigma ** (2 / 3) * (C * A) ** (1 / 3),
    )


def weighted_normal_rev(C: float, sigma: float, weights: Sequence[float]) -> float:
    """Rev of C + sigma * sum a_i Z_i for independent standard normal Z_i."""
    spread = sigma * math.sqrt(float(np.sum(np.asarray(list(weights), dtype=float) ** 2)))
    return monopoly_rev(C, spread)[0]


def revenue_set_function_witnesses() -> List[RevenueWitness]:
    """
    Small markets where S -> Rev(v_S) is not monotone, submodular,
    supermodular, subadditive or superadditive.
    """
    single_half, pair_half = monopoly_rev(1.0, 0.5)[0], bundle_rev((1.0, 1.0), 0.5)
    single_one, pair_one = monopoly_rev(1.0, 1.0)[0], bundle_rev((1.0, 1.0), 1.0)
    witnesses = [
        RevenueWitness("monotone", bundle_rev((5.0, 0.1), 1.0), monopoly_rev(5.0, 1.0)[0], "<", 1.0, (5.0, 0.1)),
        RevenueWitness("submodular", single_half, pair_half - single_half, "<", 0.5, (1.0, 1.0)),
        RevenueWitness("supermodular", single_one, pair_one - single_one, ">", 1.0, (1.0, 1.0)),
        RevenueWitness("subadditive", pair_half, 2 * single_half, ">", 0.5, (1.0, 1.0)),
        RevenueWitness("superadditive", pair_one, 2 * single_one, "<", 1.0, (1.0, 1.0)),
    ]
    for witness in witnesses:
        logger.debug("Witness against %s: %.4f %s %.4f", witness.prop, witness.lhs, witness.relation, witness.rhs)
    return witnesses
