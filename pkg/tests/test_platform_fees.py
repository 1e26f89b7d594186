import math
from fractions import Fraction

import pytest

from app.core.exception import MarketInputError
from app.services.platform_fees import (
    best_response_audit,
    enumerate_pure_equilibria,
    find_pure_equilibrium,
    on_off_prices,
    optimal_fee_grid,
    platform_graph,
    platform_revenue_and_poa,
    same_price_check,
    sweep_alpha,
    verify_platform_equilibrium,
)
from app.utils.rational import harmonic
from app.workbench.generators import generate
from app.workbench.properties import random_general


def test_no_pure_equilibrium_at_half(no_pure_market):
    assert enumerate_pure_equilibria(no_pure_market, "1/2") == []


def test_best_responses_cycle_without_pure_equilibrium(no_pure_market):
    result = best_response_audit(no_pure_market, "1/2")
    assert not result.converged
    assert len(result.cycle) >= 2


def test_logn_poa_approaches_harmonic():
    eps = Fraction(1, 100)
    market = generate("logn", {"n": 8, "eps": "1/100"}).market
    report = platform_revenue_and_poa(market, 1, [0])
    assert report.poa == (8 * harmonic(8) + eps) / (8 + eps)
    assert report.revenue == 8 + eps


def test_every_profile_verifies_at_full_fee():
    market = generate("logn", {"n": 3}).market
    for P in ([], [0], [1, 2], [0, 1, 2]):
        assert verify_platform_equilibrium(market, 1, P) == []


def test_outsider_joins_below_full_fee():
    market = generate("logn", {"n": 3}).market
    violations = verify_platform_equilibrium(market, "1/2", [0])
    assert {v.condition for v in violations} == {"outsider-prefers-on"}


def test_on_off_prices():
    market = generate("logn", {"n": 3, "eps": "1/100"}).market
    assert on_off_prices(market, [], 0) == (Fraction(301, 100), 0)
    assert on_off_prices(market, [0], 1) == (Fraction(3, 2), 0)


@pytest.mark.parametrize("alpha", ["1/10", "3/10", "1/2"])
def test_tight_poa_instance(alpha):
    a = Fraction(alpha)
    market = generate("tight-poa", {"alpha": alpha, "eps": "1/1000"}).market
    assert verify_platform_equilibrium(market, alpha, []) == []
    report = platform_revenue_and_poa(market, alpha, [])
    assert float(report.poa) == pytest.approx(float((2 - a) / (1 - a)), abs=1e-2)


def test_poa_bound_on_random_markets(rng):
    for _ in range(200):
        market = random_general(rng, max_n=5, max_m=5)
        for alpha in (Fraction(k, 10) for k in range(1, 10)):
            bound = (2 - alpha) / (1 - alpha)
            for P in enumerate_pure_equilibria(market, alpha):
                report = platform_revenue_and_poa(market, alpha, P)
                if report.optimal_welfare == 0:
                    continue
                assert report.poa <= bound


def test_find_pure_equilibrium_verifies():
    market = generate("logn", {"n": 4}).market
    for alpha in ("1/10", "1/2", "9/10"):
        P = find_pure_equilibrium(market, alpha)
        assert verify_platform_equilibrium(market, alpha, P) == []


def test_find_requires_homogeneous(no_pure_market):
    with pytest.raises(MarketInputError, match="homogeneous"):
        find_pure_equilibrium(no_pure_market, "1/2")


def test_sweep_records_every_join():
    market = generate("logn", {"n": 3}).market
    steps = sweep_alpha(market)
    assert [alpha for alpha, _ in steps] == [1, 1, 1]
    assert steps[-1][1] == frozenset({0, 1, 2})
    assert [len(P) for _, P in steps] == [1, 2, 3]


def test_platform_graph_adds_all_buyers():
    market = generate("swsh4").market
    edges = platform_graph(market, [2])
    assert {(i, 2) for i in range(4)} <= edges
    assert market.world_edges <= edges


def test_zero_welfare_gives_infinite_poa():
    market = generate("logn", {"n": 2}).market
    assert math.isinf(platform_revenue_and_poa(market, "1/2", []).poa)


def test_fee_out_of_range():
    market = generate("logn", {"n": 2}).market
    with pytest.raises(MarketInputError):
        verify_platform_equilibrium(market, "3/2", [])


def test_optimal_fee_grid_picks_best_equilibrium():
    market = generate("logn", {"n": 3}).market
    rows = optimal_fee_grid(market, ["1/2", "1"])
    assert [row.alpha for row in rows] == [Fraction(1, 2), 1]
    full = rows[1]
    assert full.equilibria == 8
    assert full.on_platform == frozenset({0})
    assert full.revenue == Fraction(301, 100)


def test_same_price_check_on_homogeneous():
    market = generate("logn", {"n": 3}).market
    assert same_price_check(market, [0, 1, 2])
