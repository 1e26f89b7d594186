from fractions import Fraction
from itertools import combinations

import pytest

from app.core.exception import MarketInputError, OracleLimitError
from app.markets.matching import max_weight_matching, welfare
from app.markets.types import BipartiteMarket
from app.services.disruption import (
    brute_force_platform_edges,
    candidate_pairs,
    eligible_buyers,
    greedy_welfare_to_revenue,
    homogeneous_extract,
    platform_revenue,
    prm_ratio,
    revenue_value,
    single_pair_max_revenue,
    top_value_cutoff,
)
from app.services.hall import BipartiteGraph, deficiency, max_diff_hall_violator, vertex_hall_violator
from app.services.shgb import shgb_optimal
from app.services.swsh import swsh_optimal, top_buyer_choices
from app.utils.rational import harmonic
from app.workbench.generators import generate
from app.workbench.properties import (
    random_general,
    random_homogeneous,
    random_swsh,
    shgb_oracle,
    swsh_oracle,
)

CHAIN_PAIRS = [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (3, 2), (3, 3), (4, 3), (4, 4)]


def _oracle(world: BipartiteMarket):
    return brute_force_platform_edges(world, restricted=True, max_pairs=world.n * world.m)


def test_adding_every_edge_loses_revenue(chain5):
    assert revenue_value(chain5, CHAIN_PAIRS) == 5
    assert revenue_value(chain5, [(i, i) for i in range(5)]) == 15
    assert brute_force_platform_edges(chain5).revenue == 15


def test_platform_revenue_reports_transactions(chain5):
    outcome = platform_revenue(chain5, [(i, i) for i in range(5)])
    assert outcome.transacting == frozenset((i, i) for i in range(5))
    assert outcome.prices == (1, 2, 3, 4, 5)
    assert outcome.welfare == 15


def test_platform_edges_must_avoid_world():
    world = generate("monopolization").market
    with pytest.raises(MarketInputError, match="overlap"):
        platform_revenue(world, [(0, 0)])


def test_monopolization_revenue():
    world = generate("monopolization", {"eps": "1/100"}).market
    assert platform_revenue(world, [(1, 0)]).revenue == Fraction(101, 100)


def test_revenue_edge_keeps_half_the_welfare():
    world = generate("prm2", {"eps": "1/100"}).market
    outcome = platform_revenue(world, [(0, 1)])
    assert outcome.welfare == 2
    assert outcome.revenue == 1


@pytest.mark.parametrize("k", [2, 3, 4])
def test_conversion_tightness(k):
    world = generate("conv-tight", {"k": k}).market
    assert brute_force_platform_edges(world, restricted=k == 4).revenue == 1
    _, revenue = greedy_welfare_to_revenue(world, [(i, i) for i in range(k)])
    assert revenue == 1


def test_greedy_keeps_harmonic_share_of_added_welfare(rng):
    checked = 0
    for _ in range(40):
        world = random_general(rng, max_n=5, max_m=5)
        matching, _ = max_weight_matching(world, world.all_pairs())
        E_p = matching - world.world_edges
        if not E_p:
            continue
        added = welfare(world, world.world_edges | E_p) - welfare(world, world.world_edges)
        _, revenue = greedy_welfare_to_revenue(world, E_p)
        assert revenue >= added / harmonic(len(E_p))
        checked += 1
    assert checked > 0


def test_prm_ratio(chain5):
    assert prm_ratio(chain5, CHAIN_PAIRS) == 1
    assert prm_ratio(chain5, []) == float("inf")


def test_candidate_pairs_skip_zero_values(chain5):
    assert candidate_pairs(chain5) == CHAIN_PAIRS


def test_brute_force_guard(chain5):
    with pytest.raises(OracleLimitError, match="limited to 4"):
        brute_force_platform_edges(chain5, max_pairs=4)


def test_restricted_search_matches_full_search(rng):
    worlds = [random_homogeneous(rng, max_n=4, max_m=3) for _ in range(8)]
    worlds += [random_general(rng, max_n=3, max_m=4) for _ in range(8)]
    for world in worlds:
        full = brute_force_platform_edges(world)
        restricted = brute_force_platform_edges(world, restricted=True)
        assert restricted.revenue == full.revenue


def test_homogeneous_alignment_and_extraction(rng):
    for _ in range(25):
        world = random_homogeneous(rng)
        optimal = welfare(world, world.all_pairs())
        for E_p in brute_force_platform_edges(world).optima:
            assert welfare(world, world.world_edges | E_p) == optimal
        _, extracted = homogeneous_extract(world)
        assert extracted >= optimal - welfare(world, world.world_edges)


def test_swsh_matches_brute_force(rng):
    assert swsh_optimal(generate("swsh4").market)[1] == brute_force_platform_edges(generate("swsh4").market).revenue
    for _ in range(20):
        world = random_homogeneous(rng, max_n=4, max_m=4, one_world_seller=True)
        edges, revenue = swsh_optimal(world)
        assert revenue == revenue_value(world, edges)
        assert revenue == _oracle(world).revenue


def test_swsh_matches_oracle_on_square_markets():
    report = swsh_oracle(instances=50, max_size=4, seed=11)
    assert report.checked == 50
    assert report.passed, report.failures


def test_swsh_seats_the_dangling_buyer_among_tied_tops():
    world = BipartiteMarket.homogeneous([2, 2, 2, 1], 1, [(0, 0), (2, 0), (3, 0)])
    edges, revenue = swsh_optimal(world)
    assert revenue == 2
    assert edges == frozenset({(1, 0)})


def test_swsh_tries_every_choice_of_tied_buyers(rng):
    for _ in range(30):
        n = rng.randint(3, 5)
        world = random_swsh(rng, n, rng.randint(1, n - 1))
        _, revenue = swsh_optimal(world)
        assert revenue == _oracle(world).revenue


def test_top_buyer_choices_split_the_tie():
    world = BipartiteMarket.homogeneous(["9/2", 4, 2, 4, 1], 2)
    assert list(top_buyer_choices(world)) == [[0, 1], [0, 3]]


def _ring_problems(world: BipartiteMarket, edges) -> list:
    """Read platform edges bought by subgraph tops as seller-to-seller arcs and check their shape."""
    home = {i: j for i, j in world.world_edges}
    members = {}
    for i, j in home.items():
        members.setdefault(j, []).append(i)
    tops = {max(group, key=lambda i: (world.buyer_value(i), -i)): j for j, group in members.items()}
    ranked = sorted(members, key=lambda j: (-max(world.buyer_value(i) for i in members[j]), j))
    position = {j: k for k, j in enumerate(ranked)}
    arcs = {j: tops[i] for i, j in edges if i in tops}

    problems, seen = [], set()
    for start in arcs:
        if start in seen:
            continue
        walk, node = [start], arcs[start]
        while node in arcs and node not in walk:
            walk.append(node)
            node = arcs[node]
        seen.update(walk)
        if node == start:
            spots = sorted(position[j] for j in walk)
            if len(walk) > 3 or spots != list(range(spots[0], spots[0] + len(walk))):
                problems.append(("cycle", walk))
    chains = [j for j in arcs if j not in position]
    if len(chains) > 1:
        problems.append(("chains", chains))
    return problems


def test_swsh4_splits_into_cycles_and_one_chain():
    world = generate("swsh4").market
    edges, revenue = swsh_optimal(world)
    assert revenue == brute_force_platform_edges(world).revenue
    buyers = [i for i, _ in edges]
    sellers = [j for _, j in edges]
    assert len(set(buyers)) == len(buyers)
    assert len(set(sellers)) == len(sellers)
    assert _ring_problems(world, edges) == []


def test_swsh_rejects_two_world_sellers():
    world = BipartiteMarket.homogeneous([2, 1], 2, [(0, 0), (0, 1)])
    with pytest.raises(MarketInputError, match="one world edge per buyer"):
        swsh_optimal(world)


def test_shgb_matches_oracle():
    report = shgb_oracle(instances=50, max_n=8, max_m=3, seed=5)
    assert report.checked == 50
    assert report.passed, report.failures


def test_shgb_requires_constant_values():
    world = BipartiteMarket(1, 2, [[1, 2]])
    with pytest.raises(MarketInputError, match="same c"):
        shgb_optimal(world)


def test_shgb_accepts_undesired_pairs():
    world = BipartiteMarket(2, 2, [[1, 0], [1, 1]], frozenset(), "identity")
    edges, revenue = shgb_optimal(world)
    assert revenue == 2
    assert all(world.value(i, j) > 0 for i, j in edges)
    assert revenue == brute_force_platform_edges(world).revenue


def test_single_pair_monopolization():
    world = generate("monopolization", {"eps": "1/100"}).market
    edges, price = single_pair_max_revenue(world, 1, 0)
    assert edges == frozenset({(1, 0)})
    assert price == Fraction(101, 100)


def test_single_pair_rejects_world_edge():
    world = generate("monopolization").market
    with pytest.raises(MarketInputError, match="world edge"):
        single_pair_max_revenue(world, 0, 0)


@pytest.mark.parametrize(
    "values, world_edges, buyer, expected",
    [
        (["1/2", "1/2"], [(0, 0)], 1, Fraction(1, 2)),
        ([3, 4, 4], [(0, 0), (1, 0)], 2, Fraction(4)),
    ],
)
def test_single_pair_accepts_tied_buyers(values, world_edges, buyer, expected):
    world = BipartiteMarket.homogeneous(values, 1, world_edges)
    _, price = single_pair_max_revenue(world, buyer, 0)
    assert price == expected
    assert price == brute_force_platform_edges(world).revenue


def test_cutoff_counts_ties():
    world = BipartiteMarket.homogeneous([3, 4, 4, 0], 1)
    assert top_value_cutoff(world) == 4
    assert eligible_buyers(world) == [1, 2]


def test_best_single_pair_bounds_optimal_revenue(rng):
    for _ in range(25):
        world = random_homogeneous(rng, max_n=4, max_m=4)
        eligible = set(eligible_buyers(world))
        pairs = [(i, j) for i, j in world.non_world_pairs() if i in eligible]
        best = max((single_pair_max_revenue(world, i, j)[1] for i, j in pairs), default=Fraction(0))
        assert best * min(world.n, world.m) >= _oracle(world).revenue


def test_hall_deficiency():
    graph = BipartiteGraph({0, 1, 2}, {0, 1}, {(0, 0), (1, 0), (2, 0)})
    assert deficiency(graph) == 2
    violator = max_diff_hall_violator(graph)
    assert violator.buyers == frozenset({0, 1, 2})
    assert violator.neighborhood == frozenset({0})


def test_vertex_violator_absent_with_spare_seller():
    graph = BipartiteGraph({0, 1}, {0, 1}, {(0, 0), (1, 1)})
    assert vertex_hall_violator(graph, 0) is None


def _subsets(items):
    items = sorted(items)
    for size in range(len(items) + 1):
        yield from (frozenset(c) for c in combinations(items, size))


def test_hall_violators_agree_with_enumeration(rng):
    for _ in range(40):
        buyers, sellers = range(rng.randint(1, 5)), range(rng.randint(1, 4))
        graph = BipartiteGraph(buyers, sellers, {(i, j) for i in buyers for j in sellers if rng.random() < 0.4})
        surplus = {X: len(X) - len(graph.neighbourhood(X)) for X in _subsets(buyers)}

        assert deficiency(graph) == max(surplus.values())
        worst = max_diff_hall_violator(graph)
        assert surplus[worst.buyers] == deficiency(graph)

        for b in buyers:
            violator = vertex_hall_violator(graph, b)
            exists = any(s > 0 for X, s in surplus.items() if b in X)
            assert (violator is not None) == exists
            if violator is not None:
                assert b in violator.buyers
                assert surplus[violator.buyers] > 0
