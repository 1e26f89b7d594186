"""Opportunity paths: alternating non-transacting / transacting walks from a buyer."""

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, Iterable

from app.core.exception import MarketInputError
from app.markets.types import BipartiteMarket, Edge, check_edges


@dataclass(frozen=True)
class Reachable:
    buyers: FrozenSet[int]
    sellers: FrozenSet[int]


def _require_edge_homogeneous(market: BipartiteMarket, edges: FrozenSet[Edge]) -> None:
    seen = {}
    for i, j in edges:
        v = market.values[i][j]
        if v > 0 and seen.setdefault(i, v) != v:
            raise MarketInputError(f"opportunity paths need homogeneous goods; buyer {i} values its edges differently")


def opportunity_reachable(
    market: BipartiteMarket,
    edges: Iterable[Edge],
    matching: Iterable[Edge],
    buyer: int,
) -> Reachable:
    """
    Agents reachable from ``buyer`` by opportunity paths.

    A path leaves a buyer on a non-transacting edge and leaves a seller on the
    transacting edge of its buyer, if any. Zero-value edges carry no trade and
    are skipped.

    Raises:
        MarketInputError: If ``buyer`` is unmatched ("no transaction") or the
            market is not homogeneous on ``edges``.
    """
    edges = check_edges(market.n, market.m, edges)
    _require_edge_homogeneous(market, edges)
    seller_of = {i: j for i, j in matching}
    buyer_of = {j: i for i, j in matching}
    if buyer not in seller_of:
        raise MarketInputError(f"no transaction: buyer {buyer} is unmatched")

    neighbours = {}
    for i, j in sorted(edges):
        if market.values[i][j] > 0:
            neighbours.setdefault(i, []).append(j)

    buyers, sellers = {buyer}, set()
    queue = deque([buyer])
    while queue:
        i = queue.popleft()
        for j in neighbours.get(i, []):
            if seller_of.get(i) == j or j in sellers:
                continue
            sellers.add(j)
            nxt = buyer_of.get(j)
            if nxt is not None and nxt not in buyers:
                buyers.add(nxt)
                queue.append(nxt)
    return Reachable(frozenset(buyers), frozenset(sellers))


def opportunity_price(
    market: BipartiteMarket,
    edges: Iterable[Edge],
    matching: Iterable[Edge],
    buyer: int,
) -> Fraction:
    """Price of the seller serving ``buyer``: lowest reachable buyer value, 0 if an unsold seller is reachable."""
    matching = frozenset(matching)
    reach = opportunity_reachable(market, edges, matching, buyer)
    sold = {j for _, j in matching}
    if any(j not in sold for j in reach.sellers):
        return Fraction(0)
    seller_of = dict(matching)
    return min(market.values[i][seller_of[i]] for i in reach.buyers)
