import math
import sys
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.integrate import quad

from app.core.exception import AppException, MarketInputError
from app.core.logger import setup_logger
from app.services.bundling import UniformPrior, normal_rev, rev_gradient_mu
from app.utils.params import get_seed, load_params

params = load_params()
bundling_params = params.get("bundling_params", {})

log_file_path = bundling_params.get("log_file_path", "bundling.log")
quantile_grid = int(bundling_params.get("quantile_grid", 4096))
monte_carlo_trials = int(bundling_params.get("monte_carlo_trials", 2000))

logger = setup_logger("Mechanism", log_file_path)


@dataclass(frozen=True)
class ThresholdMechanism:
    """
    Procurement rule that buys every seller reporting quality at most ``threshold``
    and pays each of them Rev(threshold, sigma).

    ``threshold = -inf`` buys nobody.
    """

    threshold: float
    sigma: float

    @property
    def buys_nobody(self) -> bool:
        return math.isinf(self.threshold) and self.threshold < 0

    def allocation(self, mu: float) -> int:
        return 1 if mu <= self.threshold else 0

    def payment(self, mu: float) -> float:
        if not self.allocation(mu):
            return 0.0
        return normal_rev(self.threshold, self.sigma)[0]

    def myerson_payment(self, mu: float, upper: float) -> float:
        """Rev(mu) x(mu) + integral_mu^upper x(theta) dRev(theta), by quadrature."""
        if not self.allocation(mu):
            return 0.0
        top = min(self.threshold, upper)
        integral = 0.0
        if top > mu:
            integral, _ = quad(lambda theta: rev_gradient_mu(theta, self.sigma), mu, top)
        return normal_rev(mu, self.sigma)[0] + integral


def virtual_cost(mu: float, sigma: float, prior: UniformPrior) -> float:
    """
    Expected payment per unit of allocation for a seller of quality ``mu``:
    Rev(mu, sigma) * (1 + Phi(mu) / (phi(mu) * p*(mu))).

    Raises:
        MarketInputError: If the prior density is zero at ``mu``.
    """
    density = prior.pdf(mu)
    if density <= 0:
        raise MarketInputError(f"prior density is zero at mu={mu}")
    rev, price = normal_rev(mu, sigma)
    if price <= 0:
        return rev
    return rev * (1 + prior.cdf(mu) / (density * price))


def quantile_profit_curve(prior: UniformPrior, sigma: float, grid: int = quantile_grid) -> Tuple[np.ndarray, np.ndarray]:
    """
    Surrogate profit of posting Rev(mu(q), sigma) to every seller below quantile q.

    Returns the grid ``q`` and ``-q Rev(mu(q)) + integral_0^q mu(s) ds``, whose
    derivative in ``q`` is ``mu - virtual_cost(mu)``.
    """
    q = np.linspace(0.0, 1.0, grid + 1)
    mus = prior.ppf(q)
    revs = np.array([normal_rev(float(mu), sigma)[0] for mu in mus])
    mean_below = prior.lo * q + 0.5 * (prior.hi - prior.lo) * q ** 2
    return q, mean_below - q * revs


def upper_concave_hull(x: np.ndarray, y: np.ndarray) -> List[int]:
    """Indices of the upper hull of points sorted by ``x`` (monotone chain)."""
    hull: List[int] = []
    for k in range(len(x)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (x[j] - x[i]) * (y[k] - y[i]) - (y[j] - y[i]) * (x[k] - x[i])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def ironed_virtual_surplus(prior: UniformPrior, sigma: float, grid: int = quantile_grid):
    """
    Ironed surplus rho(q) as hull segments.

    Returns:
        Tuple of the quantile grid, the profit curve on it, the hull vertex
        indices and the slope of each hull segment (non-increasing).
    """
    q, curve = quantile_profit_curve(prior, sigma, grid)
    hull = upper_concave_hull(q, curve)
    slopes = np.array([
        (curve[b] - curve[a]) / (q[b] - q[a]) for a, b in zip(hull[:-1], hull[1:])
    ])
    return q, curve, hull, slopes


def surrogate_profit(mechanism: ThresholdMechanism, prior: UniformPrior, n: int) -> float:
    """N * E[x(mu) (mu - Rev(t, sigma))], the expected surrogate profit of a threshold rule."""
    if mechanism.buys_nobody or n == 0:
        return 0.0
    t = min(mechanism.threshold, prior.hi)
    if t < prior.lo:
        return 0.0
    q = prior.cdf(t)
    mean_below = prior.lo * q + 0.5 * (prior.hi - prior.lo) * q ** 2
    return n * (mean_below - q * normal_rev(t, mechanism.sigma)[0])


def surrogate_threshold_mechanism(
    prior: UniformPrior, sigma: float, n: int, grid: int = quantile_grid
) -> Tuple[ThresholdMechanism, float]:
    """
    Threshold mechanism maximising expected surrogate profit, with ironing.

    The posted-price profit curve over quantiles is replaced by its upper
    concave hull; sellers are bought up to the last quantile where the hull's
    slope is positive.

    Typical usage example:
        mechanism, profit = surrogate_threshold_mechanism(UniformPrior(0.0, 2.0), 1.0, 100)

    Raises:
        MarketInputError: On a degenerate prior, negative ``sigma`` or ``n < 1``.
    """
    if prior.degenerate:
        raise MarketInputError("surrogate mechanism needs a nondegenerate prior")
    if sigma < 0 or n < 1:
        raise MarketInputError(f"need sigma >= 0 and N >= 1, got ({sigma}, {n})")

    try:
        q, _, hull, slopes = ironed_virtual_surplus(prior, sigma, grid)
        positive = np.flatnonzero(slopes > 0)
        if slopes[-1] > 0:
            threshold = prior.hi
        elif positive.size == 0:
            threshold = -math.inf
        else:
            threshold = float(prior.ppf(q[hull[positive[-1] + 1]]))

        mechanism = ThresholdMechanism(threshold, sigma)
        profit = surrogate_profit(mechanism, prior, n)
        logger.info(
            "Surrogate mechanism for U[%s, %s], sigma=%s, N=%d: threshold %s, profit %.6f",
            prior.lo, prior.hi, sigma, n, threshold, profit,
        )
        return mechanism, profit

    except MarketInputError:
        raise
    except Exception as e:
        logger.error(f"Error building the surrogate mechanism: {e}")
        raise AppException(e, sys)


def threshold_scan(prior: UniformPrior, sigma: float, n: int, points: int = 257) -> Tuple[float, float]:
    """Best threshold over an even grid of the prior support, buying nobody included."""
    best = (-math.inf, 0.0)
    for t in np.linspace(prior.lo, prior.hi, points):
        profit = surrogate_profit(ThresholdMechanism(float(t), sigma), prior, n)
        if profit > best[1]:
            best = (float(t), profit)
    return best


def monte_carlo_profit(
    mechanism: ThresholdMechanism,
    prior: UniformPrior,
    sigma: float,
    n: int,
    trials: int = monte_carlo_trials,
    seed: int = None,
) -> Tuple[float, float]:
    """
    Sampled platform profit of ``mechanism``: draw qualities, bundle the
    bought sellers, sell at the bundle's monopoly price, pay each Rev(t, sigma).

    Returns:
        Tuple[float, float]: Mean profit and its standard error.
    """
    if trials < 1:
        raise MarketInputError(f"trials must be at least 1, got {trials}")
    if n == 0:
        return 0.0, 0.0

    rng = np.random.default_rng(get_seed() if seed is None else seed)
    payment = 0.0 if mechanism.buys_nobody else normal_rev(mechanism.threshold, mechanism.sigma)[0]
    profits = np.empty(trials)
    for k in range(trials):
        mus = prior.sample(rng, n)
        bought = mus[mus <= mechanism.threshold]
        if bought.size == 0:
            profits[k] = 0.0
            continue
        revenue = normal_rev(float(bought.sum()), math.sqrt(bought.size) * sigma)[0]
        profits[k] = revenue - bought.size * payment

    mean = float(profits.mean())
    stderr = float(profits.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    logger.debug("Monte Carlo profit over %d trials: %.6f +/- %.6f", trials, mean, stderr)
    return mean, stderr
