import sys
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from app.core.exception import AppException, MarketInputError, OracleLimitError
from app.core.logger import setup_logger
from app.markets.matching import lex_max_weight, market_weights, max_weight_matching, max_weight_value
from app.markets.types import BipartiteMarket, Edge, Matching, check_edges
from app.markets.walrasian import seller_removed_welfare
from app.services.hall import BipartiteGraph, vertex_hall_violator
from app.utils.params import load_params

params = load_params()
disruption_params = params.get("disruption_params", {})

log_file_path = disruption_params.get("log_file_path", "disruption.log")
brute_force_max_pairs = int(disruption_params.get("brute_force_max_pairs", 20))
restricted_max_pairs = int(disruption_params.get("restricted_max_pairs", 40))

logger = setup_logger("Disruption", log_file_path)

PlatformEdgeSet = FrozenSet[Edge]


@dataclass(frozen=True)
class RevenueOutcome:
    revenue: Fraction
    welfare: Fraction
    transacting: PlatformEdgeSet
    prices: Tuple[Fraction, ...]
    matching: Matching


@dataclass(frozen=True)
class BruteForceResult:
    edges: PlatformEdgeSet
    revenue: Fraction
    welfare: Fraction
    optima: Tuple[PlatformEdgeSet, ...]
    evaluated: int


def platform_edges(world: BipartiteMarket, E_p: Iterable[Edge]) -> PlatformEdgeSet:
    """Validate a platform edge set: in range and disjoint from the world."""
    E_p = check_edges(world.n, world.m, E_p)
    overlap = E_p & world.world_edges
    if overlap:
        raise MarketInputError(f"platform edges overlap world edges: {sorted(overlap)}")
    return E_p


def _prices(weights: Dict[Edge, Fraction], m: int) -> Tuple[Fraction, Tuple[Fraction, ...]]:
    total = max_weight_value(weights)
    return total, tuple(total - seller_removed_welfare(weights, j) for j in range(m))


def platform_revenue(world: BipartiteMarket, E_p: Iterable[Edge]) -> RevenueOutcome:
    """
    Revenue the platform earns from ``E_p`` under max Walrasian prices of G_w ∪ E_p.

    Among maximum-weight matchings, the one with the largest total price on
    platform edges is used; remaining ties go to the lexicographically
    smallest pair set.

    Args:
        world (BipartiteMarket): Market whose world edges form G_w.
        E_p (Iterable[Edge]): Platform edges, disjoint from the world edges.

    Returns:
        RevenueOutcome: Revenue, welfare, transacting platform edges, prices and matching.

    Raises:
        MarketInputError: If ``E_p`` overlaps the world edges or is out of range.
    """
    E_p = platform_edges(world, E_p)
    try:
        weights = market_weights(world, world.world_edges | E_p)
        welfare, prices = _prices(weights, world.m)
        secondary = {e: prices[e[1]] for e in weights if e in E_p}
        matching, primary, revenue = lex_max_weight(weights, secondary, canonical=True)
        transacting = frozenset(e for e in matching if e in E_p)
        logger.debug(f"E_p={sorted(E_p)} revenue={revenue} welfare={welfare}")
        return RevenueOutcome(revenue, welfare, transacting, prices, matching)
    except MarketInputError:
        raise
    except Exception as e:
        logger.error(f"Revenue evaluation failed: {e}")
        raise AppException(e, sys)


def revenue_value(world: BipartiteMarket, E_p: Iterable[Edge]) -> Fraction:
    """Revenue only; skips validation and canonical tie-breaking."""
    E_p = frozenset(E_p)
    weights = market_weights(world, world.world_edges | E_p)
    _, prices = _prices(weights, world.m)
    secondary = {e: prices[e[1]] for e in weights if e in E_p}
    return lex_max_weight(weights, secondary, canonical=False)[2]


def greedy_welfare_to_revenue(world: BipartiteMarket, E_p: Iterable[Edge]) -> Tuple[PlatformEdgeSet, Fraction]:
    """
    Peel off the least lucrative platform edge until one remains; keep the best stage.

    An edge earns its seller's price if it transacts and nothing otherwise. Ties
    among least lucrative edges go to the smallest pair, and ties among stages
    to the earliest (largest) set.
    """
    current = platform_edges(world, E_p)
    outcome = platform_revenue(world, current)
    best = (current, outcome.revenue)
    while len(current) > 1:
        earning = {e: (outcome.prices[e[1]] if e in outcome.transacting else Fraction(0)) for e in current}
        drop = min(sorted(current), key=lambda e: earning[e])
        current = current - {drop}
        outcome = platform_revenue(world, current)
        logger.debug(f"greedy: dropped {drop}, revenue now {outcome.revenue}")
        if outcome.revenue > best[1]:
            best = (current, outcome.revenue)
    logger.info(f"Greedy conversion kept {len(best[0])} edges with revenue {best[1]}")
    return best


def _require_homogeneous(world: BipartiteMarket) -> None:
    if world.goods_class != "homogeneous":
        raise MarketInputError("requires homogeneous goods")


def top_value_cutoff(world: BipartiteMarket) -> Fraction:
    """Value of the min(n, m)-th best positive buyer, or 0 when fewer buyers are positive."""
    values = sorted((world.buyer_value(i) for i in range(world.n) if world.buyer_value(i) > 0), reverse=True)
    k = min(world.n, world.m)
    return values[k - 1] if 0 < k <= len(values) else Fraction(0)


def eligible_buyers(world: BipartiteMarket) -> List[int]:
    """Positive buyers worth at least the cutoff, i.e. every buyer some top-min(n, m) choice can seat."""
    cutoff = top_value_cutoff(world)
    return sorted(
        (i for i in range(world.n) if world.buyer_value(i) > 0 and world.buyer_value(i) >= cutoff),
        key=lambda i: (-world.buyer_value(i), i),
    )


def top_buyers(world: BipartiteMarket, prefer: Iterable[int] = ()) -> List[int]:
    """The min(n, m) highest-value positive buyers; ties prefer ``prefer`` members, then lower index."""
    prefer = set(prefer)
    ranked = sorted(
        (i for i in range(world.n) if world.buyer_value(i) > 0),
        key=lambda i: (-world.buyer_value(i), i not in prefer, i),
    )
    return ranked[: min(world.n, world.m)]


def homogeneous_extract(world: BipartiteMarket) -> Tuple[PlatformEdgeSet, Fraction]:
    """
    Platform edges that seat the top buyers, earning at least W* − W(G_w).

    Each top buyer left out by the world optimum gets one edge, to a seller
    freed from a displaced lower buyer or else to the lowest-index unsold seller.
    """
    _require_homogeneous(world)
    matching, _ = max_weight_matching(world, world.world_edges)
    seller_of = dict(matching)
    target = top_buyers(world, prefer=seller_of)
    target_set = set(target)

    value_order = lambda i: (-world.buyer_value(i), i)
    newcomers = sorted((i for i in target if i not in seller_of), key=value_order)
    displaced = sorted((i for i in seller_of if i not in target_set), key=value_order)
    sold = set(seller_of.values())
    free_sellers = [seller_of[i] for i in displaced] + [j for j in range(world.m) if j not in sold]

    E_p = frozenset((i, free_sellers[k]) for k, i in enumerate(newcomers))
    revenue = platform_revenue(world, E_p).revenue
    logger.info(f"Homogeneous extraction: {len(E_p)} edges, revenue {revenue}")
    return E_p, revenue


def _pair_off(buyers: List[int], sellers: List[int], forbidden: FrozenSet[Edge]) -> List[Edge]:
    pairs = []
    for i, j in zip(buyers, sellers):
        if (i, j) not in forbidden:
            pairs.append((i, j))
    return pairs


def _violator_construction(
    world: BipartiteMarket, buyer: int, seller: int, violator, ranked: List[int], others: List[int]
) -> PlatformEdgeSet:
    by_value = lambda i: (-world.buyer_value(i), i)
    hood = sorted(violator.neighborhood)
    inner = sorted(violator.buyers - {buyer}, key=by_value)[: len(hood)]
    E_p = {(buyer, seller)}
    E_p.update(_pair_off(inner, hood, world.world_edges))

    placed = {buyer, *inner}
    rest_buyers = [i for i in ranked if i not in placed]
    rest_sellers = [j for j in others if j not in violator.neighborhood]
    E_p.update(_pair_off(rest_buyers, rest_sellers, world.world_edges))
    return frozenset(E_p)


def single_pair_max_revenue(world: BipartiteMarket, buyer: int, seller: int) -> Tuple[PlatformEdgeSet, Fraction]:
    """
    Largest price at which ``seller`` can be made to sell to ``buyer``.

    Candidate prices are the eligible buyers' values not above the buyer's own,
    where a buyer is eligible when it is worth at least the min(n, m)-th best
    value. At each price the buyer needs a Hall violator of the world graph
    without ``seller``, over eligible buyers worth at least that price. Every
    feasible price is built and priced on the world; the highest achieved
    price wins, ties going to the higher candidate price.

    Returns:
        Tuple[PlatformEdgeSet, Fraction]: Platform edges and the seller's resulting
        max Walrasian price, or ``(frozenset(), 0)`` when no violator exists.

    Raises:
        MarketInputError: If the market is not homogeneous, the pair is a world
            edge, or the buyer is not among the top min(n, m) buyers.
    """
    _require_homogeneous(world)
    if not (0 <= buyer < world.n and 0 <= seller < world.m):
        raise MarketInputError(f"pair ({buyer}, {seller}) out of range")
    if (buyer, seller) in world.world_edges:
        raise MarketInputError(f"pair ({buyer}, {seller}) is already a world edge")
    ranked = eligible_buyers(world)
    if buyer not in ranked:
        raise MarketInputError(f"buyer {buyer} is not among the top {min(world.n, world.m)} buyers")

    own = world.buyer_value(buyer)
    others = [j for j in range(world.m) if j != seller]
    best: Optional[Tuple[PlatformEdgeSet, Fraction]] = None
    for price in sorted({world.buyer_value(i) for i in ranked if world.buyer_value(i) <= own}, reverse=True):
        eligible = [i for i in ranked if world.buyer_value(i) >= price]
        graph = BipartiteGraph.induced(eligible, others, world.world_edges)
        violator = vertex_hall_violator(graph, buyer)
        if violator is None:
            continue
        E_p = _violator_construction(world, buyer, seller, violator, ranked, others)
        achieved = platform_revenue(world, E_p).prices[seller]
        logger.debug(f"Pair ({buyer}, {seller}): violator of {len(violator.buyers)} buyers at price {price}, achieved {achieved}")
        if best is None or achieved > best[1]:
            best = (E_p, achieved)

    if best is None:
        logger.info(f"Pair ({buyer}, {seller}): no Hall violator, price 0")
        return frozenset(), Fraction(0)
    logger.info(f"Pair ({buyer}, {seller}): price {best[1]} with {len(best[0])} platform edges")
    return best


def prm_ratio(world: BipartiteMarket, E_p: Iterable[Edge]) -> Union[Fraction, float]:
    """W* / W(G_w ∪ E_p); infinite when the platform graph carries no welfare."""
    E_p = platform_edges(world, E_p)
    optimal = max_weight_value(market_weights(world, world.all_pairs()))
    achieved = max_weight_value(market_weights(world, world.world_edges | E_p))
    return optimal / achieved if achieved else float("inf")


def candidate_pairs(world: BipartiteMarket) -> List[Edge]:
    """Non-world pairs with positive value; zero-value pairs never change prices or revenue."""
    return [e for e in world.non_world_pairs() if world.values[e[0]][e[1]] > 0]


def _matchings(pairs: List[Edge]):
    """Every matching within ``pairs``, by size then lexicographic order."""
    for size in range(len(pairs) + 1):
        for combo in combinations(pairs, size):
            buyers = {i for i, _ in combo}
            sellers = {j for _, j in combo}
            if len(buyers) == size and len(sellers) == size:
                yield frozenset(combo)


def brute_force_platform_edges(world: BipartiteMarket, restricted: bool = False, max_pairs: int = None) -> BruteForceResult:
    """
    Exhaustive revenue maximization over platform edge sets.

    ``restricted`` limits the search to sets adding at most one edge per buyer
    and seller. Every optimum is kept in enumeration order.

    Raises:
        OracleLimitError: If the number of candidate pairs exceeds the guard.
    """
    pairs = candidate_pairs(world)
    limit = max_pairs if max_pairs is not None else (restricted_max_pairs if restricted else brute_force_max_pairs)
    if len(pairs) > limit:
        raise OracleLimitError(f"platform edge enumeration limited to {limit} candidate pairs, got {len(pairs)}")

    if restricted:
        sets = _matchings(pairs)
    else:
        sets = (frozenset(c) for size in range(len(pairs) + 1) for c in combinations(pairs, size))

    best_revenue = None
    optima: List[PlatformEdgeSet] = []
    evaluated = 0
    for E_p in sets:
        evaluated += 1
        revenue = revenue_value(world, E_p)
        if best_revenue is None or revenue > best_revenue:
            best_revenue, optima = revenue, [E_p]
        elif revenue == best_revenue:
            optima.append(E_p)

    best = optima[0]
    welfare = max_weight_value(market_weights(world, world.world_edges | best))
    logger.info(f"Brute force over {evaluated} edge sets: revenue {best_revenue} ({len(optima)} optima)")
    return BruteForceResult(best, best_revenue, welfare, tuple(optima), evaluated)
