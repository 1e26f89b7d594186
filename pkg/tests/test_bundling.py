import math
import random

import pytest

from app.core.exception import MarketInputError
from app.services.bundling import (
    BundlingMarket,
    NormalDemand,
    alpha_zero,
    bundle_profit,
    complete_info_optimal_bundle,
    monopoly_rev,
    optimal_normalized_price,
    rev_deviation_bound,
    rev_gradient_mu,
    revenue_set_function_witnesses,
    t0_threshold,
)
from app.workbench.generators import generate
from app.workbench.oracles import brute_force_bundle
from app.workbench.properties import bundle_contiguity, rev_gradient_grid


def test_rev_of_one():
    assert monopoly_rev(1.0, 4.41)[0] == pytest.approx(1.0, abs=1e-2)


def test_zero_dispersion_sells_at_quality():
    assert monopoly_rev(2.5, 0.0) == (2.5, 2.5)


@pytest.mark.parametrize("mu, sigma", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5)])
def test_invalid_rev_inputs(mu, sigma):
    with pytest.raises(MarketInputError):
        monopoly_rev(mu, sigma)


def test_price_satisfies_first_order_condition():
    alpha = 1.5
    z = optimal_normalized_price(alpha)
    demand = NormalDemand(alpha, 1.0)
    assert demand.price == pytest.approx(z)
    assert demand.rev == pytest.approx(z * demand.optimal_demand)


def test_alpha_zero():
    assert alpha_zero() == pytest.approx(1.253, abs=5e-3)


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0, 5.0])
@pytest.mark.parametrize("sigma", [0.5, 1.0, 3.0])
def test_gradient_is_sale_probability(mu, sigma):
    h = 1e-5
    numeric = (monopoly_rev(mu + h, sigma)[0] - monopoly_rev(mu - h, sigma)[0]) / (2 * h)
    assert rev_gradient_mu(mu, sigma) == pytest.approx(numeric, rel=1e-6)


def test_gradient_matches_central_differences_on_grid():
    report = rev_gradient_grid(points=20, h=1e-5, rel=1e-6)
    assert report.checked == 400
    assert report.passed, report.failures


def test_bundle4_window():
    window = complete_info_optimal_bundle(generate("bundle4").market)
    assert window.qualities == pytest.approx((1.1, 2.1, 3.1))
    assert (window.start, window.stop) == (1, 4)
    assert window.profit == pytest.approx(window.revenue - window.payment)


def test_single_seller_has_nothing_to_gain():
    window = complete_info_optimal_bundle(BundlingMarket((2.0,), 1.0))
    assert window.empty
    assert window.profit == 0.0


def test_empty_bundle_profit():
    assert bundle_profit([], 1.0) == 0.0


def test_two_quality_market_checks_mix():
    with pytest.raises(MarketInputError):
        BundlingMarket((1.0, 30.0), 1.0, quality_mix=(1, 1.0, 20.0))
    market = BundlingMarket.two_quality(4, 3, 1.0, 20.0, 0.5)
    assert market.qualities == (1.0, 1.0, 1.0, 20.0)


def test_t0_threshold():
    assert t0_threshold(1.0, 2.0) == 7
    assert t0_threshold(1.0, 1.0001) == 3
    with pytest.raises(MarketInputError):
        t0_threshold(2.0, 1.0)


def test_rev_deviation_bound():
    assert rev_deviation_bound(10.0, 1.0, (1, 1, 1, 1)) == pytest.approx(2 * 40 ** (1 / 3))
    assert rev_deviation_bound(10.0, 1.0, (0, 0)) == 0.0
    with pytest.raises(MarketInputError):
        rev_deviation_bound(10.0, 1.0, (2.0,))


def test_revenue_is_no_classical_set_function():
    witnesses = revenue_set_function_witnesses()
    assert {w.prop for w in witnesses} == {
        "monotone", "submodular", "supermodular", "subadditive", "superadditive",
    }
    assert all(w.holds for w in witnesses)


def test_optimal_bundle_is_a_window():
    rng = random.Random(3)
    for _ in range(20):
        n = rng.randint(1, 6)
        market = BundlingMarket(tuple(rng.uniform(0.2, 5.0) for _ in range(n)), rng.uniform(0.3, 2.0))
        best = brute_force_bundle(market)
        window = complete_info_optimal_bundle(market)
        assert best.contiguous
        assert math.isclose(best.profit, window.profit, abs_tol=1e-9)


def test_best_bundle_is_contiguous_up_to_ten_sellers():
    report = bundle_contiguity(instances=100, max_n=10, seed=3)
    assert report.checked == 100
    assert report.passed, report.failures
