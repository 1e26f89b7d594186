import random
from fractions import Fraction

import pytest

from app.core.exception import MarketInputError, OracleLimitError
from app.markets.three_sided import (
    ThreeSidedMarket,
    TipState,
    check_allocation,
    infer_cost_structure,
    shift_store_costs,
    zeros,
)
from app.services.delivery import (
    brute_force_3sided,
    check_equilibrium_allocation,
    courier_plan_max,
    efficient_with_tip_equilibrium,
    fold_tips,
    min_tip,
    verify_equilibrium,
    without_tip_profit_max,
)
from app.services.delivery_flow import optimal_welfare_single_minded, optimal_welfare_structured
from app.workbench.generators import generate
from app.workbench.properties import flow_equilibria, random_single_minded, random_split_market


def test_structure_is_validated():
    with pytest.raises(MarketInputError, match="store_split"):
        ThreeSidedMarket([[1], [1]], [[[0], [1]], [[5], [0]]], "store_split")


def test_infer_cost_structure(tip_bad_market):
    assert "store_split" in infer_cost_structure(tip_bad_market)
    assert "single_minded_buyers" in infer_cost_structure(tip_bad_market)


def test_allocation_unit_constraints(tip_bad_market):
    with pytest.raises(MarketInputError, match="store twice"):
        check_allocation(tip_bad_market, [(0, 0, 0), (1, 0, 1)])


def test_courier_plan_for_low_buyer(tip_bad_market):
    plan = courier_plan_max(tip_bad_market, [(0, 0)])
    assert plan.utilities[0] == 1
    assert plan.compensation[0][0] == 1
    assert plan.allocation == frozenset({(0, 0, 0)})


def test_empty_plan_pays_nothing(tip_bad_market):
    plan = courier_plan_max(tip_bad_market, [])
    assert plan.compensation == zeros(2, 1)
    assert plan.utilities == (0, 0)


def test_min_tip_of_high_buyer(tip_bad_market):
    plan = courier_plan_max(tip_bad_market, [(0, 0)])
    assert min_tip(tip_bad_market, plan.compensation, None, 1, 0) == 12


def test_min_tip_zero_for_covered_order():
    market = ThreeSidedMarket([[5]], [[[2]]])
    w = ((Fraction(3),),)
    assert min_tip(market, w, None, 0, 0) == 0


def test_welfare_three_allocation_is_supported(tip_bad_market):
    state = check_equilibrium_allocation(tip_bad_market, [(0, 0, 0)])
    assert state is not None
    assert tip_bad_market.welfare([(0, 0, 0)]) == 3


def test_clearing_market_rejects_single_delivery(clearing_market):
    assert check_equilibrium_allocation(clearing_market, [(0, 0, 0)]) is None


def _without_tip_example():
    prices = (Fraction(5),)
    compensation = ((Fraction(0),), (Fraction(11),))
    return prices, compensation, [(1, 0, 0)]


def test_without_tip_equilibrium_verifies(tip_bad_market):
    prices, compensation, x = _without_tip_example()
    assert verify_equilibrium(tip_bad_market, prices, compensation, x) == []
    assert verify_equilibrium(tip_bad_market, prices, compensation, x, zeros(2, 1)) == []


def test_priced_unsold_store_is_a_violation(tip_bad_market):
    problems = verify_equilibrium(tip_bad_market, (Fraction(5),), zeros(2, 1), [])
    assert problems


def test_fold_tips_moves_tips_into_prices():
    state = TipState((Fraction(2),), ((Fraction(1),),), ((Fraction(3),),))
    folded = fold_tips(state, [(0, 0, 0)])
    assert folded.prices == (5,)
    assert folded.compensation == ((4,),)
    assert folded.tips == ((0,),)


def test_structured_optimum(tip_bad_market):
    allocation, welfare = optimal_welfare_structured(tip_bad_market)
    assert welfare == 3
    assert allocation == frozenset({(0, 0, 0)})


def test_single_minded_picks_cheaper_courier():
    market = ThreeSidedMarket([[10]], [[[2]], [[5]]])
    allocation, welfare = optimal_welfare_single_minded(market)
    assert welfare == 8
    assert allocation == frozenset({(0, 0, 0)})


def test_single_minded_unprofitable_delivery():
    market = ThreeSidedMarket([[1]], [[[2]], [[5]]])
    assert optimal_welfare_single_minded(market) == (frozenset(), 0)


def test_efficient_with_tip_equilibrium(tip_bad_market):
    state, allocation = efficient_with_tip_equilibrium(tip_bad_market)
    assert tip_bad_market.welfare(allocation) == 3
    assert verify_equilibrium(tip_bad_market, state.prices, state.compensation, allocation, state.tips) == []


def test_efficient_requires_structure(clearing_market):
    with pytest.raises(MarketInputError):
        efficient_with_tip_equilibrium(clearing_market)


def test_profit_with_single_store_courier():
    market = ThreeSidedMarket([[5], [3]], [[[2], [2]]], "single_store_couriers", (0,))
    plan = without_tip_profit_max(market)
    assert plan.prices == (5,)
    assert plan.profit == 3
    assert plan.allocation == frozenset({(0, 0, 0)})


def test_profit_requires_store_couriers(tip_bad_market):
    with pytest.raises(MarketInputError, match="single_store_couriers"):
        without_tip_profit_max(tip_bad_market)


def test_brute_force_tip_bad(tip_bad_market):
    assert brute_force_3sided(tip_bad_market, "opt_welfare").value == 3
    assert brute_force_3sided(tip_bad_market, "best_without_tip").value == -1
    assert brute_force_3sided(tip_bad_market, "best_with_tip").value == 3


def test_brute_force_market_clearing(clearing_market):
    assert brute_force_3sided(clearing_market, "opt_welfare").value == 1
    assert brute_force_3sided(clearing_market, "best_with_tip").value == -1


def test_no_without_tip_equilibrium():
    market = generate("no-without-tip").market
    assert brute_force_3sided(market, "best_without_tip").value is None
    assert brute_force_3sided(market, "best_with_tip").value is not None


def test_brute_force_guard(clearing_market):
    with pytest.raises(OracleLimitError):
        brute_force_3sided(clearing_market, "opt_welfare", max_cells=4)


def test_shift_store_costs():
    market = ThreeSidedMarket([[3, 1]], [[[0, 0]]])
    shifted = shift_store_costs(market, ["1", "2"])
    assert shifted.values == ((2, 0),)


@pytest.mark.parametrize("structure", ["store_split", "buyer_split"])
def test_split_flow_optimum_is_a_certified_equilibrium(structure):
    rng = random.Random(7)
    for _ in range(15):
        market = random_split_market(rng, structure, max_size=3)
        _, welfare = optimal_welfare_structured(market)
        assert welfare == brute_force_3sided(market, "opt_welfare").value
        state, allocation = efficient_with_tip_equilibrium(market)
        assert market.welfare(allocation) == welfare
        assert verify_equilibrium(market, state.prices, state.compensation, allocation, state.tips) == []


def test_single_minded_flow_optimum_is_a_certified_equilibrium():
    rng = random.Random(9)
    for _ in range(15):
        market = random_single_minded(rng, max_size=3)
        _, welfare = optimal_welfare_single_minded(market)
        assert welfare == brute_force_3sided(market, "opt_welfare").value
        state, allocation = efficient_with_tip_equilibrium(market)
        assert market.welfare(allocation) == welfare
        assert verify_equilibrium(market, state.prices, state.compensation, allocation, state.tips) == []


def test_flow_equilibria_up_to_four_per_side():
    report = flow_equilibria(instances=50, max_size=4, seed=13)
    assert report.checked == 150
    assert report.passed, report.failures
