from fractions import Fraction
from itertools import combinations

import pytest

from app.core.exception import MarketInputError
from app.markets.flow import FlowNetwork, min_cost_flow
from app.markets.matching import lex_max_weight, max_weight_matching, welfare
from app.markets.opportunity import opportunity_price, opportunity_reachable
from app.markets.types import BipartiteMarket
from app.markets.walrasian import (
    competitive_equilibrium,
    max_walrasian_prices,
    min_walrasian_prices,
    verify_competitive_equilibrium,
)


@pytest.fixture
def small_market():
    return BipartiteMarket(2, 2, [[3, 2], [2, 0]])


def test_market_rejects_bad_shapes():
    with pytest.raises(MarketInputError):
        BipartiteMarket(2, 2, [[1, 2]])
    with pytest.raises(MarketInputError):
        BipartiteMarket(1, 1, [[-1]])
    with pytest.raises(MarketInputError):
        BipartiteMarket(1, 1, [[1]], frozenset({(0, 1)}))
    with pytest.raises(MarketInputError):
        BipartiteMarket(2, 2, [[1, 2], [1, 1]], goods_class="homogeneous")


def test_max_weight_matching(small_market):
    matching, weight = max_weight_matching(small_market, small_market.all_pairs())
    assert matching == frozenset({(0, 1), (1, 0)})
    assert weight == 4


def test_zero_value_pairs_never_matched():
    market = BipartiteMarket(2, 1, [[0], [0]])
    assert max_weight_matching(market, market.all_pairs()) == (frozenset(), 0)


def test_lex_max_weight_prefers_secondary_among_optima():
    primary = {(0, 0): Fraction(1), (1, 0): Fraction(1)}
    matching, total, secondary = lex_max_weight(primary, {(1, 0): Fraction(5)})
    assert matching == frozenset({(1, 0)})
    assert (total, secondary) == (1, 5)


def test_walrasian_price_bounds(small_market):
    edges = small_market.all_pairs()
    assert max_walrasian_prices(small_market, edges) == (2, 1)
    assert min_walrasian_prices(small_market, edges) == (1, 0)


def test_competitive_equilibrium_verifies(small_market):
    edges = small_market.all_pairs()
    eq = competitive_equilibrium(small_market, edges)
    assert eq.welfare == 4
    assert verify_competitive_equilibrium(small_market, edges, eq.matching, eq.prices) == []


def test_verification_names_envy(small_market):
    edges = small_market.all_pairs()
    violations = verify_competitive_equilibrium(small_market, edges, [(0, 1), (1, 0)], [0, 0])
    assert "envy" in {v.condition for v in violations}


def test_verification_flags_priced_unsold_seller(small_market):
    violations = verify_competitive_equilibrium(small_market, small_market.all_pairs(), [(0, 0)], [0, 1])
    assert "unsold-zero-price" in {v.condition for v in violations}


def test_opportunity_price_matches_max_price():
    market = BipartiteMarket.homogeneous([5, 3], 2)
    edges = market.all_pairs()
    matching = [(0, 0), (1, 1)]
    reach = opportunity_reachable(market, edges, matching, 0)
    assert reach.buyers == frozenset({0, 1})
    assert opportunity_price(market, edges, matching, 0) == max_walrasian_prices(market, edges)[0] == 3


def test_opportunity_reaches_unsold_seller():
    market = BipartiteMarket.homogeneous([5], 2)
    assert opportunity_price(market, market.all_pairs(), [(0, 0)], 0) == 0


def test_opportunity_requires_transaction():
    market = BipartiteMarket.homogeneous([5, 3], 1)
    with pytest.raises(MarketInputError, match="no transaction"):
        opportunity_reachable(market, market.all_pairs(), [(0, 0)], 1)


def test_welfare_of_world_only(chain5):
    assert welfare(chain5, chain5.world_edges) == 0
    assert welfare(chain5, chain5.all_pairs()) == 15


def test_min_cost_flow_unit_costs():
    net = FlowNetwork()
    net.add_edge("s", "a", cap=1, cost=1)
    net.add_edge("s", "b", cap=1, cost=3)
    net.add_edge("a", "t", cap=1)
    net.add_edge("b", "t", cap=1)
    result = min_cost_flow(net, "s", "t", 2)
    assert result.cost == 4
    assert result.unit_costs == [1, 3]
    assert result.flow[("s", "a")] == 1


def test_min_cost_flow_infeasible():
    net = FlowNetwork()
    net.add_edge("s", "t", cap=1, cost=Fraction(1, 2))
    with pytest.raises(MarketInputError, match="infeasible"):
        min_cost_flow(net, "s", "t", 2)


def test_min_cost_flow_leaves_network_untouched():
    net = FlowNetwork()
    net.add_edge("s", "a", cap=2, cost=1)
    net.add_edge("a", "t", cap=2, cost=Fraction(1, 3))
    before = [(arc.src, arc.dst, arc.cap, arc.cost, arc.flow) for arc in net.arcs]
    first = min_cost_flow(net, "s", "t", 2)
    assert [(arc.src, arc.dst, arc.cap, arc.cost, arc.flow) for arc in net.arcs] == before
    assert min_cost_flow(net, "s", "t", 2) == first


def test_heavy_edge_beats_larger_matching():
    market = BipartiteMarket(2, 2, [[5, 1], [1, 0]])
    assert max_weight_matching(market, market.all_pairs()) == (frozenset({(0, 0)}), 5)


def _enumerated_welfare(market):
    pairs = [e for e in sorted(market.all_pairs()) if market.value(*e) > 0]
    best = Fraction(0)
    for size in range(1, min(market.n, market.m) + 1):
        for combo in combinations(pairs, size):
            if len({i for i, _ in combo}) == size and len({j for _, j in combo}) == size:
                best = max(best, sum(market.value(i, j) for i, j in combo))
    return best


def test_matching_agrees_with_enumeration(rng):
    for _ in range(60):
        n, m = rng.randint(1, 4), rng.randint(1, 4)
        values = [[Fraction(rng.randint(0, 9), rng.randint(1, 4)) for _ in range(m)] for _ in range(n)]
        market = BipartiteMarket(n, m, values)
        matching, weight = max_weight_matching(market, market.all_pairs())
        assert weight == _enumerated_welfare(market)
        assert weight == sum(market.value(i, j) for i, j in matching)
