"""
Exact maximum-weight bipartite matching.

Rational weights are scaled to integers and handed to networkx's blossom
solver, which stays in integer arithmetic on integer weights. Tie-breaking
layers (lexicographic canonical optima, secondary objectives) sit on top.
"""

import math
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Tuple

import networkx as nx

from app.markets.types import BipartiteMarket, Edge, Matching, check_edges


def solve_integer(weights: Mapping[Edge, int]) -> Tuple[List[Edge], int]:
    """Maximum-weight matching for strictly positive integer weights."""
    if not weights:
        return [], 0
    graph = nx.Graph()
    for (i, j), w in sorted(weights.items()):
        graph.add_edge(("b", i), ("s", j), weight=w)

    pairs = []
    for u, v in nx.max_weight_matching(graph, maxcardinality=False, weight="weight"):
        buyer, seller = (u, v) if u[0] == "b" else (v, u)
        pairs.append((buyer[1], seller[1]))
    return sorted(pairs), sum(weights[e] for e in pairs)


def _scale(weights: Mapping[Edge, Fraction]) -> Tuple[Dict[Edge, int], int]:
    lcm = 1
    for w in weights.values():
        lcm = lcm * w.denominator // math.gcd(lcm, w.denominator)
    return {e: int(w * lcm) for e, w in weights.items()}, lcm


def _canonical(weights: Mapping[Edge, int]) -> Tuple[List[Edge], int]:
    """Lexicographically smallest optimal pair list.

    Buyers are fixed in index order, each to the smallest seller that still
    admits an optimal completion.
    """
    _, total = solve_integer(weights)
    chosen: List[Edge] = []
    taken = set()
    acc = 0
    for i in sorted({b for b, _ in weights}):
        later = {e: w for e, w in weights.items() if e[0] > i and e[1] not in taken}
        options = sorted(j for (b, j) in weights if b == i and j not in taken)
        for j in options:
            rest = {e: w for e, w in later.items() if e[1] != j}
            if acc + weights[(i, j)] + solve_integer(rest)[1] == total:
                chosen.append((i, j))
                taken.add(j)
                acc += weights[(i, j)]
                break
    return chosen, total


def max_weight_value(weights: Mapping[Edge, Fraction]) -> Fraction:
    """Optimal total weight only (fast path, no tie-breaking)."""
    positive = {e: Fraction(w) for e, w in weights.items() if w > 0}
    if not positive:
        return Fraction(0)
    scaled, lcm = _scale(positive)
    return Fraction(solve_integer(scaled)[1], lcm)


def lex_max_weight(
    primary: Mapping[Edge, Fraction],
    secondary: Mapping[Edge, Fraction],
    canonical: bool = True,
) -> Tuple[Matching, Fraction, Fraction]:
    """Maximize ``primary``, then ``secondary`` among primary optima.

    Only edges with positive primary weight are used. Secondary weights must be
    nonnegative; edges missing from ``secondary`` count as 0.

    Returns:
        (matching, primary total, secondary total)
    """
    positive = {e: Fraction(w) for e, w in primary.items() if w > 0}
    if not positive:
        return frozenset(), Fraction(0), Fraction(0)
    scaled_p, lcm_p = _scale(positive)
    sec = {e: Fraction(secondary.get(e, 0)) for e in positive}
    scaled_s, lcm_s = _scale(sec)
    k = sum(scaled_s.values()) + 1
    combined = {e: scaled_p[e] * k + scaled_s[e] for e in positive}

    pairs, total = _canonical(combined) if canonical else solve_integer(combined)
    return frozenset(pairs), Fraction(total // k, lcm_p), Fraction(total % k, lcm_s)


def market_weights(market: BipartiteMarket, edges: Iterable[Edge]) -> Dict[Edge, Fraction]:
    """Positive market values restricted to ``edges``."""
    return {(i, j): market.values[i][j] for i, j in edges if market.values[i][j] > 0}


def max_weight_matching(market: BipartiteMarket, edges: Iterable[Edge]) -> Tuple[Matching, Fraction]:
    """
    Maximum-weight matching of ``market`` within ``edges``.

    Ties among optima go to the lexicographically smallest pair set; pairs of
    zero value are never matched.

    Args:
        market (BipartiteMarket): The market.
        edges (Iterable[Edge]): Permitted (buyer, seller) pairs.

    Returns:
        Tuple[Matching, Fraction]: The matching and its weight.

    Raises:
        MarketInputError: If an edge is out of range.
    """
    edges = check_edges(market.n, market.m, edges)
    weights = market_weights(market, edges)
    if not weights:
        return frozenset(), Fraction(0)
    scaled, lcm = _scale(weights)
    pairs, total = _canonical(scaled)
    return frozenset(pairs), Fraction(total, lcm)


def welfare(market: BipartiteMarket, edges: Iterable[Edge]) -> Fraction:
    """Optimal welfare W within ``edges``."""
    return max_weight_value(market_weights(market, edges))
