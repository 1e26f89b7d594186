import math
import sys
from dataclasses import dataclass
from typing import List, Optional, Tuple

from app.core.exception import AppException, MarketInputError
from app.core.logger import setup_logger
from app.services.bundling import PROFIT_TIE, bundle_profit, monopoly_rev, normal_rev
from app.utils.params import load_params

params = load_params()
bundling_params = params.get("bundling_params", {})

log_file_path = bundling_params.get("log_file_path", "bundling.log")

logger = setup_logger("InHouse", log_file_path)

# Posted prices in tie-break order.
POSTED_PRICES = ("pi0", "piL", "piH")


@dataclass(frozen=True)
class InHousePlan:
    """
    One posted price plus an in-house production run.

    ``posted_price`` is ``pi0`` (source nobody), ``piL`` (Rev(mu_L) buys the
    low-quality sellers) or ``piH`` (Rev(mu_H) buys everyone).
    """

    posted_price: str
    price: float
    produce_count: int
    produce_quality: Optional[float]
    sourced: int
    revenue: float
    profit: float


@dataclass(frozen=True)
class LargeMarketThresholds:
    """Limit regime: which posted price wins on each side of ``tau``."""

    case: str
    tau: Optional[float]
    below: str
    above: str
    produce_high: bool


def _validate(n: int, n_low: int, mu_low: float, mu_high: float, sigma: float, capacity: int):
    if not 0 <= n_low <= n:
        raise MarketInputError(f"need 0 <= N_L <= N, got N_L={n_low}, N={n}")
    if capacity < 0:
        raise MarketInputError(f"capacity must be nonnegative, got {capacity}")
    if not 0 < mu_low <= mu_high:
        raise MarketInputError(f"need 0 < mu_L <= mu_H, got ({mu_low}, {mu_high})")
    if sigma < 0:
        raise MarketInputError(f"sigma must be nonnegative, got {sigma}")


def inhouse_profit(
    n: int, n_low: int, mu_low: float, mu_high: float, sigma: float,
    posted_price: str, produce_count: int, produce_quality: Optional[float],
) -> InHousePlan:
    """
    Evaluate Rev(bundle) - |S(pi)| pi - m Rev(mu_M, sigma) for one strategy.

    Raises:
        MarketInputError: On an unknown posted price or a missing quality.
    """
    if posted_price not in POSTED_PRICES:
        raise MarketInputError(f"unknown posted price {posted_price!r}")
    if produce_count > 0 and produce_quality is None:
        raise MarketInputError("produce_quality is required when producing")

    if posted_price == "pi0":
        price, sourced = 0.0, []
    elif posted_price == "piL":
        price, sourced = monopoly_rev(mu_low, sigma)[0], [mu_low] * n_low
    else:
        price, sourced = monopoly_rev(mu_high, sigma)[0], [mu_low] * n_low + [mu_high] * (n - n_low)

    produced = [produce_quality] * produce_count
    bundle = sourced + produced
    revenue = normal_rev(float(sum(bundle)), math.sqrt(len(bundle)) * sigma)[0] if bundle else 0.0
    cost = len(sourced) * price
    if produce_count:
        cost += produce_count * monopoly_rev(produce_quality, sigma)[0]
    return InHousePlan(
        posted_price, price, produce_count,
        produce_quality if produce_count else None,
        len(sourced), revenue, revenue - cost,
    )


def inhouse_strategies(
    n: int, n_low: int, mu_low: float, mu_high: float, sigma: float, capacity: int
) -> List[InHousePlan]:
    """
    Every (posted price, count, quality) strategy, in tie-break order.

    Production never mixes the two qualities, so each run is all-low or all-high.
    """
    _validate(n, n_low, mu_low, mu_high, sigma, capacity)
    plans = []
    for produce_count in range(capacity + 1):
        for posted_price in POSTED_PRICES:
            qualities = (None,) if produce_count == 0 else (mu_low, mu_high)
            for quality in qualities:
                plans.append(inhouse_profit(n, n_low, mu_low, mu_high, sigma, posted_price, produce_count, quality))
    return plans


def two_quality_inhouse(
    n: int, n_low: int, mu_low: float, mu_high: float, sigma: float, capacity: int
) -> InHousePlan:
    """
    Profit-maximising posted price and in-house production for a two-quality market.

    Ties go to fewer produced units, then to the lower posted price.

    Args:
        n (int): Number of sellers N.
        n_low (int): Number of low-quality sellers N_L.
        mu_low (float): Low quality mu_L.
        mu_high (float): High quality mu_H.
        sigma (float): Buyer value dispersion.
        capacity (int): Most items the platform can produce, M.

    Returns:
        InHousePlan: The optimal strategy and its profit.

    Typical usage example:
        plan = two_quality_inhouse(4, 3, 1.0, 20.0, 0.5, 1)
        plan.posted_price, plan.produce_quality  # ("piL", 1.0)
    """
    try:
        best = None
        for plan in inhouse_strategies(n, n_low, mu_low, mu_high, sigma, capacity):
            logger.debug(
                "price=%s m=%d quality=%s profit=%.6f",
                plan.posted_price, plan.produce_count, plan.produce_quality, plan.profit,
            )
            if best is None or plan.profit > best.profit + PROFIT_TIE:
                best = plan

        logger.info(
            "In-house plan for N=%d, N_L=%d, M=%d: %s, produce %d at %s, profit %.6f",
            n, n_low, capacity, best.posted_price, best.produce_count, best.produce_quality, best.profit,
        )
        return best

    except MarketInputError:
        raise
    except Exception as e:
        logger.error(f"Error planning in-house production: {e}")
        raise AppException(e, sys)


def large_market_thresholds(mu_low: float, mu_high: float, sigma: float) -> LargeMarketThresholds:
    """Winning posted price as a function of the low-quality share tau when N is large."""
    rev_low = monopoly_rev(mu_low, sigma)[0]
    rev_high = monopoly_rev(mu_high, sigma)[0]
    produce_high = mu_high > rev_high

    if mu_low > rev_low:
        tau = (mu_high - rev_high) / (mu_high - rev_low)
        return LargeMarketThresholds("low-profitable", tau, "piH", "piL", produce_high)
    if mu_high > rev_high:
        tau = (mu_high - rev_high) / (mu_high - mu_low)
        return LargeMarketThresholds("high-profitable", tau, "piH", "pi0", produce_high)
    return LargeMarketThresholds("unprofitable", None, "pi0", "pi0", produce_high)


def complementarity(
    n_low: int, produce_count: int, mu_low: float, mu_high: float, sigma: float
) -> Tuple[float, float, float]:
    """
    Profit of bundling the low-quality sellers together with ``produce_count``
    high-quality items, against producing alone and bundling alone.

    Returns:
        Tuple[float, float, float]: ``(joint, produce_only, bundle_only)``.
    """
    if produce_count < 1 or n_low < 1:
        raise MarketInputError("complementarity needs at least one seller and one produced item")
    rev_low = monopoly_rev(mu_low, sigma)[0]
    rev_high = monopoly_rev(mu_high, sigma)[0]
    joint = (
        monopoly_rev(produce_count * mu_high + n_low * mu_low, math.sqrt(produce_count + n_low) * sigma)[0]
        - produce_count * rev_high
        - n_low * rev_low
    )
    produce_only = bundle_profit([mu_high] * produce_count, sigma)
    bundle_only = bundle_profit([mu_low] * n_low, sigma)
    return joint, produce_only, bundle_only
