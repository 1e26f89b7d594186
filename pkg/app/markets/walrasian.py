"""Max/min Walrasian prices and competitive-equilibrium verification."""

from fractions import Fraction
from typing import Dict, Iterable, List, Sequence

from app.markets.matching import market_weights, max_weight_matching, max_weight_value
from app.markets.types import (
    BipartiteMarket,
    CompetitiveEquilibrium,
    Edge,
    PriceVector,
    Violation,
    check_edges,
)


def seller_removed_welfare(weights: Dict[Edge, Fraction], j: int) -> Fraction:
    return max_weight_value({e: w for e, w in weights.items() if e[1] != j})


def max_walrasian_prices(market: BipartiteMarket, edges: Iterable[Edge]) -> PriceVector:
    """p̄_j = W − W(without seller j): each seller's marginal contribution."""
    edges = check_edges(market.n, market.m, edges)
    weights = market_weights(market, edges)
    total = max_weight_value(weights)
    return tuple(total - seller_removed_welfare(weights, j) for j in range(market.m))


def min_walrasian_prices(market: BipartiteMarket, edges: Iterable[Edge]) -> PriceVector:
    """p̲_j = W(with a second copy of seller j) − W."""
    edges = check_edges(market.n, market.m, edges)
    weights = market_weights(market, edges)
    total = max_weight_value(weights)
    copy = market.m
    prices = []
    for j in range(market.m):
        doubled = dict(weights)
        doubled.update({(i, copy): w for (i, s), w in weights.items() if s == j})
        prices.append(max_weight_value(doubled) - total)
    return tuple(prices)


def competitive_equilibrium(market: BipartiteMarket, edges: Iterable[Edge]) -> CompetitiveEquilibrium:
    """Canonical max-weight matching supported by max Walrasian prices."""
    matching, weight = max_weight_matching(market, edges)
    return CompetitiveEquilibrium(matching, max_walrasian_prices(market, edges), weight)


def verify_competitive_equilibrium(
    market: BipartiteMarket,
    edges: Iterable[Edge],
    matching: Iterable[Edge],
    prices: Sequence[Fraction],
) -> List[Violation]:
    """
    Check the five competitive-equilibrium conditions.

    Conditions are reported as ``feasibility`` (pairs outside ``edges``,
    negative prices, wrong dimensions), ``unit-constraint``, ``envy``,
    ``nonnegative-utility`` and ``unsold-zero-price``.

    Returns:
        List[Violation]: Empty when (matching, prices) is a competitive equilibrium.
    """
    edges = check_edges(market.n, market.m, edges)
    matching = list(matching)
    violations: List[Violation] = []

    if len(prices) != market.m:
        return [Violation("feasibility", None, f"expected {market.m} prices, got {len(prices)}")]
    prices = [Fraction(p) for p in prices]

    for j, p in enumerate(prices):
        if p < 0:
            violations.append(Violation("feasibility", ("seller", j), f"negative price {p}"))

    buyer_of: Dict[int, int] = {}
    seller_of: Dict[int, int] = {}
    for i, j in matching:
        if (i, j) not in edges:
            violations.append(Violation("feasibility", ("pair", (i, j)), "not a permitted edge"))
        if i in seller_of:
            violations.append(Violation("unit-constraint", ("buyer", i), "buyer receives two goods"))
        if j in buyer_of:
            violations.append(Violation("unit-constraint", ("seller", j), "good sold twice"))
        seller_of.setdefault(i, j)
        buyer_of.setdefault(j, i)

    for i in range(market.n):
        own = Fraction(0)
        if i in seller_of:
            j = seller_of[i]
            own = market.values[i][j] - prices[j]
            if own < 0:
                violations.append(Violation("nonnegative-utility", ("buyer", i), f"utility {own}"))
        for j in range(market.m):
            if (i, j) in edges and market.values[i][j] - prices[j] > own:
                violations.append(
                    Violation("envy", ("buyer", i), f"prefers seller {j} at utility {market.values[i][j] - prices[j]}")
                )
                break

    for j, p in enumerate(prices):
        if j not in buyer_of and p != 0:
            violations.append(Violation("unsold-zero-price", ("seller", j), f"price {p}"))

    return violations
