"""
Min-cost flow constructions for delivery markets.

Covers of an order set by couriers, and the welfare-optimal allocations of
split-cost and single-minded markets.
"""

import sys
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from app.core.exception import AppException, MarketInputError
from app.core.logger import setup_logger
from app.markets.flow import FlowNetwork, FlowResult, min_cost_flow
from app.markets.three_sided import Allocation3, Order, ThreeSidedMarket, structure_problem
from app.utils.params import load_params

params = load_params()
delivery_params = params.get("delivery_params", {})

logger = setup_logger("DeliveryFlow", delivery_params.get("log_file_path", "delivery.log"))

SOURCE, SINK = "source", "sink"


def min_cost_cover(
    market: ThreeSidedMarket,
    orders: Iterable[Order],
    couriers: Optional[Iterable[int]] = None,
    required: Optional[int] = None,
    doubled: Optional[int] = None,
) -> Optional[Tuple[Fraction, Dict[Order, int]]]:
    """
    Cheapest way for ``couriers`` to deliver ``required`` of ``orders``.

    ``required`` defaults to every order. ``doubled`` names a courier that may
    take two orders, standing in for an extra copy of that courier.

    Returns:
        (cost, {order: courier}), or None when no such cover exists.
    """
    orders = sorted(set(orders))
    couriers = sorted(range(market.l) if couriers is None else set(couriers))
    required = len(orders) if required is None else required
    if required == 0:
        return Fraction(0), {}

    net = FlowNetwork()
    for b, s in orders:
        net.add_edge(SOURCE, ("o", b, s))
        for d in couriers:
            if market.can_deliver(d, s):
                net.add_edge(("o", b, s), ("d", d), cost=market.cost(d, b, s))
    for d in couriers:
        net.add_edge(("d", d), SINK, cap=2 if d == doubled else 1)
    try:
        result = min_cost_flow(net, SOURCE, SINK, required)
    except MarketInputError:
        return None
    assignment = {(u[1], u[2]): v[1] for (u, v) in result.flow if u[0] == "o" and v[0] == "d"}
    return result.cost, assignment


def _split_parts(market: ThreeSidedMarket, by_store: bool) -> Tuple[Dict[Order, Fraction], Dict[Tuple[int, int], Fraction]]:
    """Split c_d(b, s) into a shared order part and a per-courier part keyed by store (or buyer)."""
    keys = range(market.n) if by_store else range(market.m)
    order_part: Dict[Order, Fraction] = {}
    courier_part: Dict[Tuple[int, int], Fraction] = {}
    for key in keys:
        sample = (0, key) if by_store else (key, 0)
        gaps = [market.cost(d, *sample) - market.cost(0, *sample) for d in range(market.l)]
        floor = min(gaps)
        for d in range(market.l):
            courier_part[(d, key)] = gaps[d] - floor
    for b, s in market.orders():
        order_part[(b, s)] = min(market.cost(d, b, s) for d in range(market.l))
    return order_part, courier_part


def _best_flow(
    net: FlowNetwork, max_units: int, extract: Callable[[FlowResult], Allocation3]
) -> Tuple[Allocation3, Fraction]:
    best: Tuple[Allocation3, Fraction] = (frozenset(), Fraction(0))
    for f in range(1, max_units + 1):
        try:
            result = min_cost_flow(net, SOURCE, SINK, f)
        except MarketInputError:
            break
        logger.debug(f"flow value {f}: welfare {-result.cost}")
        if -result.cost > best[1]:
            best = (extract(result), -result.cost)
    return best


def optimal_welfare_structured(market: ThreeSidedMarket) -> Tuple[Allocation3, Fraction]:
    """
    Welfare-optimal allocation when costs split as c(b,s) + c_d(s) or c(b,s) + c_d(b).

    Store split: source → buyer → order → store → store copy → courier → sink.
    Buyer split mirrors it with the roles of buyers and stores exchanged. All
    arcs carry one unit; every flow value is tried and the best kept.

    Raises:
        MarketInputError: If the declared structure is neither split.
    """
    structure = market.cost_structure
    if structure not in ("store_split", "buyer_split"):
        raise MarketInputError(f"requires store_split or buyer_split costs, got {structure}")
    if min(market.m, market.n, market.l) == 0:
        return frozenset(), Fraction(0)
    try:
        by_store = structure == "store_split"
        order_part, courier_part = _split_parts(market, by_store)
        net = FlowNetwork()
        for key in range(market.m if by_store else market.n):
            net.add_edge(SOURCE, ("b" if by_store else "s", key))
        for b, s in market.orders():
            gain = -market.value(b, s)
            if by_store:
                net.add_edge(("b", b), ("o", b, s), cost=gain)
                net.add_edge(("o", b, s), ("s", s), cost=order_part[(b, s)])
            else:
                net.add_edge(("s", s), ("o", b, s), cost=gain + order_part[(b, s)])
                net.add_edge(("o", b, s), ("b", b))
        hub = "s" if by_store else "b"
        for key in range(market.n if by_store else market.m):
            net.add_edge((hub, key), (hub + "'", key))
            for d in range(market.l):
                net.add_edge((hub + "'", key), ("d", d), cost=courier_part[(d, key)])
        for d in range(market.l):
            net.add_edge(("d", d), SINK)

        def extract(result: FlowResult) -> Allocation3:
            orders = [(u[1], u[2]) for (u, v) in result.flow if u[0] == "o"]
            courier_of = {u[1]: v[1] for (u, v) in result.flow if u[0] == hub + "'" and v[0] == "d"}
            return frozenset((b, s, courier_of[s if by_store else b]) for b, s in orders)

        allocation, welfare = _best_flow(net, min(market.m, market.n, market.l), extract)
        logger.info(f"Structured ({structure}) optimum: {len(allocation)} deliveries, welfare {welfare}")
        return allocation, welfare
    except MarketInputError:
        raise
    except Exception as e:
        logger.error(f"Structured welfare flow failed: {e}")
        raise AppException(e, sys)


def optimal_welfare_single_minded(market: ThreeSidedMarket) -> Tuple[Allocation3, Fraction]:
    """Welfare-optimal allocation when every buyer values at most one store: store → order → courier."""
    problem = structure_problem(market, "single_minded_buyers")
    if problem:
        raise MarketInputError(f"requires single-minded buyers: {problem}")
    net = FlowNetwork()
    orders: List[Order] = [(b, s) for b, s in market.orders() if market.value(b, s) > 0]
    for s in sorted({s for _, s in orders}):
        net.add_edge(SOURCE, ("s", s))
    for b, s in orders:
        net.add_edge(("s", s), ("o", b, s), cost=-market.value(b, s))
        for d in market.couriers_for(s):
            net.add_edge(("o", b, s), ("d", d), cost=market.cost(d, b, s))
    for d in range(market.l):
        net.add_edge(("d", d), SINK)

    def extract(result: FlowResult) -> Allocation3:
        return frozenset((u[1], u[2], v[1]) for (u, v) in result.flow if u[0] == "o" and v[0] == "d")

    if not orders or market.l == 0:
        return frozenset(), Fraction(0)
    allocation, welfare = _best_flow(net, min(len(orders), market.n, market.l), extract)
    logger.info(f"Single-minded optimum: {len(allocation)} deliveries, welfare {welfare}")
    return allocation, welfare
