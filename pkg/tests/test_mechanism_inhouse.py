import math

import numpy as np
import pytest

from app.core.exception import MarketInputError
from app.services.bundling import UniformPrior, monopoly_rev
from app.services.inhouse import (
    complementarity,
    inhouse_profit,
    inhouse_strategies,
    large_market_thresholds,
    two_quality_inhouse,
)
from app.services.mechanism import (
    ThresholdMechanism,
    monte_carlo_profit,
    surrogate_profit,
    surrogate_threshold_mechanism,
    threshold_scan,
    upper_concave_hull,
    virtual_cost,
)

PRIOR = UniformPrior(0.5, 3.0)


def test_hull_keeps_concave_points():
    x = np.array([0.0, 1.0, 2.0])
    assert upper_concave_hull(x, np.array([0.0, 1.0, 0.0])) == [0, 1, 2]


def test_hull_drops_collinear_and_convex_points():
    x = np.array([0.0, 1.0, 2.0])
    assert upper_concave_hull(x, np.array([0.0, 1.0, 2.0])) == [0, 2]
    assert upper_concave_hull(x, np.array([0.0, -1.0, 0.0])) == [0, 2]


def test_surrogate_beats_threshold_scan():
    mechanism, profit = surrogate_threshold_mechanism(PRIOR, 1.0, 10, grid=512)
    _, scanned = threshold_scan(PRIOR, 1.0, 10)
    assert profit >= scanned - 1e-9
    assert profit == pytest.approx(surrogate_profit(mechanism, PRIOR, 10))


def test_surrogate_rejects_bad_inputs():
    with pytest.raises(MarketInputError):
        surrogate_threshold_mechanism(UniformPrior(1.0, 1.0), 1.0, 10)
    with pytest.raises(MarketInputError):
        surrogate_threshold_mechanism(PRIOR, 1.0, 0)


def test_virtual_cost_needs_support():
    with pytest.raises(MarketInputError):
        virtual_cost(5.0, 1.0, PRIOR)
    assert virtual_cost(1.0, 1.0, PRIOR) > monopoly_rev(1.0, 1.0)[0]


def test_monte_carlo_is_seeded():
    mechanism = ThresholdMechanism(2.0, 1.0)
    first = monte_carlo_profit(mechanism, PRIOR, 1.0, 5, trials=200, seed=42)
    second = monte_carlo_profit(mechanism, PRIOR, 1.0, 5, trials=200, seed=42)
    assert first == second


def test_monte_carlo_degenerate_cases():
    assert monte_carlo_profit(ThresholdMechanism(2.0, 1.0), PRIOR, 1.0, 0) == (0.0, 0.0)
    nobody = ThresholdMechanism(-math.inf, 1.0)
    assert nobody.buys_nobody
    assert monte_carlo_profit(nobody, PRIOR, 1.0, 5, trials=50, seed=1) == (0.0, 0.0)
    with pytest.raises(MarketInputError):
        monte_carlo_profit(nobody, PRIOR, 1.0, 5, trials=0)


def test_payment_matches_envelope_formula():
    mechanism = ThresholdMechanism(2.0, 1.0)
    assert mechanism.myerson_payment(1.0, PRIOR.hi) == pytest.approx(monopoly_rev(2.0, 1.0)[0], rel=1e-6)
    assert mechanism.payment(2.5) == 0.0


@pytest.mark.parametrize(
    "price, m, quality, expected",
    [
        ("piL", 0, None, 0.242),
        ("piH", 0, None, -54.066),
        ("piL", 1, 1.0, 0.428),
        ("piL", 1, 20.0, 0.303),
        ("piH", 1, 1.0, -53.849),
        ("piH", 1, 20.0, -54.247),
    ],
)
def test_inhouse_strategy_profits(price, m, quality, expected):
    plan = inhouse_profit(4, 3, 1.0, 20.0, 0.5, price, m, quality)
    assert plan.profit == pytest.approx(expected, abs=1e-2)


def test_sourcing_nobody_without_production():
    plan = inhouse_profit(4, 3, 1.0, 20.0, 0.5, "pi0", 0, None)
    assert plan.profit == 0.0
    assert plan.sourced == 0


def test_best_inhouse_plan():
    plan = two_quality_inhouse(4, 3, 1.0, 20.0, 0.5, 1)
    assert (plan.posted_price, plan.produce_count, plan.produce_quality) == ("piL", 1, 1.0)
    assert plan.profit == pytest.approx(0.428, abs=1e-2)


def test_strategy_enumeration():
    plans = inhouse_strategies(4, 3, 1.0, 20.0, 0.5, 1)
    assert len(plans) == 9
    assert [p.posted_price for p in plans[:3]] == ["pi0", "piL", "piH"]


def test_inhouse_input_checks():
    with pytest.raises(MarketInputError):
        inhouse_profit(4, 3, 1.0, 20.0, 0.5, "piX", 0, None)
    with pytest.raises(MarketInputError):
        inhouse_profit(4, 3, 1.0, 20.0, 0.5, "piL", 1, None)
    with pytest.raises(MarketInputError):
        two_quality_inhouse(4, 5, 1.0, 20.0, 0.5, 1)


def test_complementarity():
    joint, produce_only, bundle_only = complementarity(3, 2, 1.0, 20.0, 1.0)
    assert joint == pytest.approx(0.952, abs=1e-2)
    assert produce_only == pytest.approx(1.196, abs=1e-2)
    assert bundle_only == pytest.approx(0.018, abs=1e-2)


def test_large_market_regimes():
    assert large_market_thresholds(1.0, 20.0, 0.5).case == "low-profitable"
    high = large_market_thresholds(0.1, 20.0, 1.0)
    assert high.case == "high-profitable"
    assert high.produce_high
    assert 0 < high.tau < 1
