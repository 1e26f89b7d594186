"""
Revenue-optimal platform edges for identity-goods markets with buyer degree at most two.

The platform earns c for every seller it makes essential, so the problem reduces
to choosing a buyer set B_v with non-positive surplus (|N(B_v)| ≤ |B_v|) that
maximizes min(|B_v|, m) − |N(B_v)| + k_v, where k_v is the largest matching of
B_v into N(B_v) over non-world pairs.
"""

import sys
from fractions import Fraction
from itertools import combinations
from typing import Dict, FrozenSet, List, Tuple

import networkx as nx

from app.core.exception import AppException, MarketInputError
from app.core.logger import setup_logger
from app.markets.types import BipartiteMarket
from app.services.disruption import PlatformEdgeSet, platform_revenue
from app.services.hall import BipartiteGraph, SurplusSet, maximum_matching, surplus_set
from app.utils.params import load_params

params = load_params()
disruption_params = params.get("disruption_params", {})

logger = setup_logger("SHGB", disruption_params.get("log_file_path", "disruption.log"))


def validate_shgb(world: BipartiteMarket) -> Fraction:
    """Check the preconditions and return the common value c."""
    values = {v for row in world.values for v in row if v > 0}
    if len(values) != 1:
        raise MarketInputError("SHGB markets require every desired pair to carry the same c > 0")
    neighbours: Dict[int, List[int]] = {}
    for i, j in sorted(world.world_edges):
        neighbours.setdefault(i, []).append(j)
    seen_pairs = set()
    for i, hood in neighbours.items():
        if len(hood) > 2:
            raise MarketInputError(f"SHGB markets allow world degree at most 2; buyer {i} has {len(hood)}")
        if len(hood) == 2:
            pair = tuple(hood)
            if pair in seen_pairs:
                raise MarketInputError(f"sellers {pair[0]} and {pair[1]} share more than one buyer")
            seen_pairs.add(pair)
    return next(iter(values))


def max_cardinality_violator(graph: BipartiteGraph) -> FrozenSet[int]:
    """
    Largest buyer set whose neighbourhood is no bigger than itself.

    Buyers adding at most one new neighbour are absorbed until none remain. The
    leftover degree-two buyers become edges of a graph over the unclaimed sellers:
    cyclic components are taken whole, and the remaining slack buys the largest
    tree components.
    """
    chosen = set()
    hood = set()
    changed = True
    while changed:
        changed = False
        for i in sorted(graph.buyers - chosen):
            fresh = graph.neighbourhood([i]) - hood
            if len(fresh) <= 1:
                chosen.add(i)
                hood |= fresh
                changed = True

    slack = len(chosen) - len(hood)
    rest = nx.MultiGraph()
    for i in sorted(graph.buyers - chosen):
        u, v = sorted(graph.neighbourhood([i]))
        rest.add_edge(u, v, buyer=i)

    trees = []
    for component in nx.connected_components(rest):
        sub = rest.subgraph(component)
        buyers = sorted(data["buyer"] for _, _, data in sub.edges(data=True))
        if len(buyers) >= len(component):
            chosen.update(buyers)
            slack += len(buyers) - len(component)
        else:
            trees.append((len(buyers), min(component), buyers))

    trees.sort(key=lambda t: (-t[0], t[1]))
    for _, _, buyers in trees[: max(slack, 0)]:
        chosen.update(buyers)
    return frozenset(chosen)


def violator_edges(world: BipartiteMarket, graph: BipartiteGraph, violator: SurplusSet) -> PlatformEdgeSet:
    """
    Complement matching inside N(B_v), then fresh sellers until B_v faces min(|B_v|, m) sellers.

    Only desired (positive-value) pairs become platform edges.
    """
    desired = BipartiteGraph(
        violator.buyers,
        violator.neighborhood,
        frozenset(
            (i, j)
            for i in violator.buyers
            for j in violator.neighborhood
            if (i, j) not in graph.edges and world.value(i, j) > 0
        ),
    )
    inner = maximum_matching(desired)
    edges = set(inner.items())
    extra = min(len(violator.buyers), world.m) - len(violator.neighborhood)
    spare_sellers = [j for j in range(world.m) if j not in violator.neighborhood]
    for i in sorted(violator.buyers):
        if extra <= 0:
            break
        if i in inner:
            continue
        j = next((j for j in spare_sellers if world.value(i, j) > 0), None)
        if j is not None:
            edges.add((i, j))
            spare_sellers.remove(j)
            extra -= 1
    return frozenset(edges)


def candidate_violators(graph: BipartiteGraph) -> List[FrozenSet[int]]:
    """Max-cardinality set, every small set, and low-degree buyers plus up to two degree-two buyers."""
    def admissible(buyers) -> bool:
        return len(graph.neighbourhood(buyers)) <= len(buyers)

    low = frozenset(i for i in graph.buyers if len(graph.neighbourhood([i])) <= 1)
    high = sorted(graph.buyers - low)
    found = [frozenset(), max_cardinality_violator(graph)]
    for size in (1, 2):
        found.extend(frozenset(c) for c in combinations(sorted(graph.buyers), size) if admissible(c))
    for size in range(0, 3):
        for extra in combinations(high, size):
            buyers = low | set(extra)
            if buyers and admissible(buyers):
                found.append(frozenset(buyers))
    return list(dict.fromkeys(found))


def shgb_optimal(world: BipartiteMarket) -> Tuple[PlatformEdgeSet, Fraction]:
    """
    Revenue-optimal platform edges for an SHGB market.

    Each candidate violator is turned into its achieving edge set and scored by
    the revenue engine; the best score wins, ties to the earlier candidate.

    Raises:
        MarketInputError: If desired pairs do not share one positive value, a buyer has
            world degree above two, or two sellers share two buyers.
    """
    c = validate_shgb(world)
    try:
        graph = BipartiteGraph(range(world.n), range(world.m), world.world_edges)
        candidates = candidate_violators(graph)
        best = None
        best_violator = None
        for buyers in candidates:
            violator = surplus_set(graph, buyers)
            edges = violator_edges(world, graph, violator)
            revenue = platform_revenue(world, edges).revenue
            logger.debug(f"B_v={sorted(buyers)} k_v={violator.k_v} revenue={revenue}")
            if best is None or revenue > best[1]:
                best, best_violator = (edges, revenue), violator
        logger.info(f"SHGB optimum: |B_v|={len(best_violator.buyers)} over {len(candidates)} candidates, revenue {best[1]} (c={c})")
        return best
    except MarketInputError:
        raise
    except Exception as e:
        logger.error(f"SHGB search failed: {e}")
        raise AppException(e, sys)
