import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from app.core.exception import AppException, InvariantError, MarketInputError, OracleLimitError
from app.core.logger import setup_logger
from app.markets.matching import lex_max_weight, max_weight_value
from app.markets.three_sided import (
    Allocation3,
    CourierPlan,
    Matrix,
    Order,
    ThreeSidedMarket,
    TipState,
    Triple,
    check_allocation,
    matrix_from,
    structure_problem,
    zeros,
)
from app.markets.types import Edge, Violation
from app.markets.walrasian import seller_removed_welfare
from app.services.delivery_flow import min_cost_cover, optimal_welfare_single_minded, optimal_welfare_structured
from app.utils.params import load_params

params = load_params()
delivery_params = params.get("delivery_params", {})

log_file_path = delivery_params.get("log_file_path", "delivery.log")
brute_force_max_cells = int(delivery_params.get("brute_force_max_cells", 64))

logger = setup_logger("Delivery", log_file_path)

BRUTE_FORCE_MODES = ("opt_welfare", "best_with_tip", "best_without_tip", "max_profit")


@dataclass(frozen=True)
class ProfitPlan:
    prices: Tuple[Fraction, ...]
    compensation: Matrix
    allocation: Allocation3
    profit: Fraction
    epsilon: Fraction


@dataclass(frozen=True)
class BruteForce3Report:
    mode: str
    value: Optional[Fraction]
    allocation: Optional[Allocation3]
    evaluated: int
    certified: int


def _orders_of(x: Iterable[Triple]) -> Dict[Order, int]:
    return {(b, s): d for b, s, d in x}


def _check_omega(market: ThreeSidedMarket, omega: Iterable[Order]) -> List[Order]:
    omega = sorted(set(omega))
    buyers = [b for b, _ in omega]
    stores = [s for _, s in omega]
    if len(set(buyers)) != len(buyers) or len(set(stores)) != len(stores):
        raise MarketInputError("orders must be buyer- and store-disjoint")
    if len(omega) > market.l:
        raise MarketInputError(f"{len(omega)} orders exceed the {market.l} couriers")
    for b, s in omega:
        if not (0 <= b < market.m and 0 <= s < market.n):
            raise MarketInputError(f"order ({b}, {s}) out of range")
    return omega


def _courier_utilities(market: ThreeSidedMarket, omega: List[Order]) -> Tuple[Fraction, Dict[Order, int], Tuple[Fraction, ...]]:
    """
    Cover cost C_Ω, a cheapest cover, and the largest courier utilities ū.

    ū_d is courier d's marginal contribution in the order–courier market where
    order o values courier d at H − c_d(o), H = Σv + Σc. Without d the most
    orders still coverable is k, so ū_d = (|Ω| − k)·H + C_k(D∖d) − C_Ω. This is
    C_Ω(D∖d) − C_Ω when d is dispensable and H + C_{Ω−1}(D∖d) − C_Ω when |Ω| = l.
    """
    if not omega:
        return Fraction(0), {}, tuple(Fraction(0) for _ in range(market.l))
    cover = min_cost_cover(market, omega)
    if cover is None:
        raise MarketInputError(f"no courier plan serves orders {omega}")
    cost, assignment = cover
    big = market.total_value() + market.total_cost()

    utilities = []
    for d in range(market.l):
        others = [e for e in range(market.l) if e != d]
        for k in range(len(omega), -1, -1):
            partial = min_cost_cover(market, omega, others, required=k)
            if partial is not None:
                utilities.append((len(omega) - k) * big + partial[0] - cost)
                break
    return cost, assignment, tuple(utilities)


def courier_plan_max(market: ThreeSidedMarket, omega: Iterable[Order]) -> CourierPlan:
    """
    Courier plan serving exactly ``omega`` with the highest courier utilities.

    The plan delivers ``omega`` by a cheapest cover. Served orders pay
    w̄ = ū_d + c_d(order); every other order pays nothing.

    Raises:
        MarketInputError: If ``omega`` reuses a buyer or store, exceeds the
            courier count, or cannot be covered.
    """
    omega = _check_omega(market, omega)
    cost, assignment, utilities = _courier_utilities(market, omega)
    pay = {(b, s): utilities[d] + market.cost(d, b, s) for (b, s), d in assignment.items()}
    allocation = frozenset((b, s, d) for (b, s), d in assignment.items())
    logger.debug(f"plan for {omega}: cover cost {cost}, utilities {utilities}")
    return CourierPlan(matrix_from(pay, market.m, market.n), allocation, utilities, cost)


def min_tip(market: ThreeSidedMarket, w: Matrix, tips_others: Optional[Matrix], b: int, s: int) -> Optional[Fraction]:
    """
    Least tip on (b, s) that puts it in some courier's best-response set.

    Buyer b's tips on its other orders count as zero. Returns None when no
    courier can deliver for store ``s``.
    """
    def tip(b2: int, s2: int) -> Fraction:
        if b2 == b or tips_others is None:
            return Fraction(0)
        return tips_others[b2][s2]

    best = None
    for d in market.couriers_for(s):
        own = market.cost(d, b, s)
        need = max(Fraction(0), own - w[b][s])
        for b2, s2 in market.deliverable(d):
            if (b2, s2) != (b, s):
                need = max(need, w[b2][s2] + tip(b2, s2) - market.cost(d, b2, s2) - w[b][s] + own)
        best = need if best is None else min(best, need)
    return best


def fold_tips(state: TipState, x: Iterable[Triple]) -> TipState:
    """Move tips into prices and compensations on executed orders: p' = p + t, w' = w + t, t' = 0."""
    prices = list(state.prices)
    comp = [list(row) for row in state.compensation]
    for b, s, _ in x:
        t = state.t(b, s)
        prices[s] += t
        comp[b][s] += t
    rows, cols = len(comp), len(prices)
    return TipState(tuple(prices), tuple(tuple(r) for r in comp), zeros(rows, cols))


def _buyer_weights(market: ThreeSidedMarket) -> Dict[Edge, Fraction]:
    return {(b, s): market.value(b, s) for b, s in market.orders() if market.value(b, s) > 0}


def _max_prices(weights: Dict[Edge, Fraction], n: int) -> Tuple[Fraction, ...]:
    total = max_weight_value(weights)
    return tuple(total - seller_removed_welfare(weights, s) for s in range(n))


def check_equilibrium_allocation(market: ThreeSidedMarket, x: Iterable[Triple]) -> Optional[TipState]:
    """
    Zero-tip equilibrium supporting allocation ``x``, or None when none exists.

    Orders outside the allocation are discounted by the tip t̲ = min_d c_d(b,s) + ū_d
    a buyer would need under the highest courier compensation. ``x`` is supported
    exactly when its buyer matching is max-weight in that discounted market; the
    prices returned are that market's max Walrasian prices.

    Raises:
        MarketInputError: If ``x`` is not a feasible allocation.
    """
    x = check_allocation(market, x)
    served = _orders_of(x)
    omega = sorted(served)
    cost, _, utilities = _courier_utilities(market, omega)
    own_cost = sum((market.cost(d, b, s) for (b, s), d in served.items()), Fraction(0))
    if own_cost != cost:
        logger.info(f"allocation couriers cost {own_cost}, cheapest cover {cost}: not supported")
        return None

    store_of = {b: s for b, s in omega}
    weights: Dict[Edge, Fraction] = {}
    for b, s in market.orders():
        v = market.value(b, s)
        if store_of.get(b) != s:
            options = [market.cost(d, b, s) + utilities[d] for d in market.couriers_for(s)]
            if not options:
                continue
            v -= min(options)
        if v > 0:
            weights[(b, s)] = v

    best = max_weight_value(weights)
    chosen = sum((market.value(b, s) for b, s in omega), Fraction(0))
    if chosen < best:
        logger.info(f"allocation weight {chosen} below discounted optimum {best}: not supported")
        return None

    pay = {(b, s): utilities[d] + market.cost(d, b, s) for (b, s), d in served.items()}
    state = TipState(_max_prices(weights, market.n), matrix_from(pay, market.m, market.n), zeros(market.m, market.n))
    logger.debug(f"allocation {sorted(x)} supported with prices {state.prices}")
    return state


def without_tip_certificate(market: ThreeSidedMarket, x: Iterable[Triple]) -> Optional[TipState]:
    """
    Without-tip equilibrium supporting ``x``, or None.

    The buyer matching must be max-weight in the buyer–store market and the
    couriers must form a cheapest cover of the served orders.
    """
    x = check_allocation(market, x)
    served = _orders_of(x)
    weights = _buyer_weights(market)
    if sum((market.value(b, s) for b, s in served), Fraction(0)) < max_weight_value(weights):
        return None
    cost, _, utilities = _courier_utilities(market, sorted(served))
    if sum((market.cost(d, b, s) for (b, s), d in served.items()), Fraction(0)) != cost:
        return None
    pay = {(b, s): utilities[d] + market.cost(d, b, s) for (b, s), d in served.items()}
    return TipState(_max_prices(weights, market.n), matrix_from(pay, market.m, market.n))


def _best_response_problem(utilities: Dict[object, Fraction], chosen: object, chosen_utility: Fraction) -> Optional[str]:
    top = max(utilities.values(), default=Fraction(0))
    if top > 0:
        if chosen is None:
            return f"abstains while an option gives utility {top}"
        if chosen_utility < top:
            return f"takes utility {chosen_utility} below the best {top}"
    elif chosen is not None and chosen_utility != 0:
        return f"takes negative utility {chosen_utility}"
    return None


def verify_equilibrium(
    market: ThreeSidedMarket,
    prices: Sequence[Fraction],
    compensation: Matrix,
    x: Iterable[Triple],
    tips: Optional[Matrix] = None,
) -> List[Violation]:
    """
    Check a without-tip equilibrium, or a with-tip one when ``tips`` is given.

    Conditions: buyer-best-response, minimum-tip (with tips only),
    courier-best-response, unsold-zero-price and undelivered-zero-compensation.
    Buyers are judged against the stated best-response sets only.
    """
    x = check_allocation(market, x)
    served = _orders_of(x)
    store_of = {b: s for b, s in served}
    courier_order = {d: (b, s) for (b, s), d in served.items()}
    tip = (lambda b, s: tips[b][s]) if tips is not None else (lambda b, s: Fraction(0))
    problems: List[Violation] = []

    for b in range(market.m):
        utilities: Dict[object, Fraction] = {}
        for s in range(market.n):
            cost = Fraction(0)
            if tips is not None:
                needed = min_tip(market, compensation, tips, b, s)
                if needed is None:
                    continue
                cost = needed
            utilities[s] = market.value(b, s) - prices[s] - cost
        chosen = store_of.get(b)
        issue = _best_response_problem(utilities, chosen, utilities.get(chosen, Fraction(0)))
        if issue:
            problems.append(Violation("buyer-best-response", b, issue))
        if tips is not None and chosen is not None:
            needed = min_tip(market, compensation, tips, b, chosen)
            if tips[b][chosen] != needed:
                problems.append(Violation("minimum-tip", (b, chosen), f"tip {tips[b][chosen]} but minimum is {needed}"))

    for d in range(market.l):
        utilities = {o: compensation[o[0]][o[1]] + tip(*o) - market.cost(d, *o) for o in market.deliverable(d)}
        chosen = courier_order.get(d)
        issue = _best_response_problem(utilities, chosen, utilities.get(chosen, Fraction(0)))
        if issue:
            problems.append(Violation("courier-best-response", d, issue))

    sold = {s for _, s in served}
    for s in range(market.n):
        if s not in sold and prices[s] != 0:
            problems.append(Violation("unsold-zero-price", s, f"price {prices[s]}"))
    for b, s in market.orders():
        if (b, s) in served:
            continue
        if compensation[b][s] != 0:
            problems.append(Violation("undelivered-zero-compensation", (b, s), f"compensation {compensation[b][s]}"))
        if tip(b, s) != 0:
            problems.append(Violation("undelivered-zero-compensation", (b, s), f"tip {tip(b, s)}"))
    return problems


def efficient_with_tip_equilibrium(market: ThreeSidedMarket) -> Tuple[TipState, Allocation3]:
    """
    Welfare-optimal with-tip equilibrium for split-cost or single-minded markets.

    Raises:
        MarketInputError: If the market has neither structure.
        InvariantError: If the optimal allocation fails certification.
    """
    if market.cost_structure in ("store_split", "buyer_split"):
        allocation, welfare = optimal_welfare_structured(market)
    elif structure_problem(market, "single_minded_buyers") is None:
        allocation, welfare = optimal_welfare_single_minded(market)
    else:
        raise MarketInputError("requires split courier costs or single-minded buyers")

    state = check_equilibrium_allocation(market, allocation)
    if state is None:
        logger.error(f"optimal allocation {sorted(allocation)} (welfare {welfare}) failed certification")
        raise InvariantError(f"optimal allocation {sorted(allocation)} is not supported by any equilibrium")
    logger.info(f"Efficient with-tip equilibrium: welfare {welfare}, prices {state.prices}")
    return state, allocation


def without_tip_profit_max(market: ThreeSidedMarket) -> ProfitPlan:
    """
    Profit-maximizing without-tip equilibrium when each courier serves one store.

    Values are nudged by ε·(max cost − cheapest courier cost) with
    ε = min positive v / (1 + Σ costs), so the Walrasian allocation of the nudged
    buyer–store market is the cheapest one to deliver. Prices are the max
    Walrasian prices of the original market, and every executed order pays its
    cheapest courier exactly that courier's cost.

    Raises:
        MarketInputError: If couriers are not tied to stores or a store has none.
    """
    if market.cost_structure != "single_store_couriers":
        raise MarketInputError("requires single_store_couriers")
    for s in range(market.n):
        if not market.couriers_for(s):
            raise MarketInputError(f"store {s} has no courier")
    try:
        weights = _buyer_weights(market)
        prices = _max_prices(weights, market.n)
        if not weights:
            return ProfitPlan(prices, zeros(market.m, market.n), frozenset(), Fraction(0), Fraction(0))

        costs = [market.cost(d, b, s) for d in range(market.l) for b, s in market.deliverable(d)]
        top_cost = max(costs, default=Fraction(0))
        epsilon = min(weights.values()) / (1 + market.total_cost())
        cheapest = {o: market.min_cost(*o) for o in weights}
        nudged = {o: v + epsilon * (top_cost - cheapest[o]) for o, v in weights.items()}
        matching = lex_max_weight(nudged, {}, canonical=True)[0]

        if sum(weights[o] for o in matching) < max_weight_value(weights):
            logger.warning(f"ε = {epsilon} moved the allocation off the welfare optimum; using the exact tie-break")
            bonus = {o: top_cost - cheapest[o] for o in weights}
            matching = lex_max_weight(weights, bonus, canonical=True)[0]

        allocation = set()
        pay: Dict[Order, Fraction] = {}
        for b, s in sorted(matching):
            d = min(market.couriers_for(s), key=lambda e: (market.cost(e, b, s), e))
            allocation.add((b, s, d))
            pay[(b, s)] = market.cost(d, b, s)
        profit = sum(prices, Fraction(0)) - sum(pay.values(), Fraction(0))
        logger.info(f"Without-tip profit optimum: {len(allocation)} orders, profit {profit}, ε = {epsilon}")
        return ProfitPlan(prices, matrix_from(pay, market.m, market.n), frozenset(allocation), profit, epsilon)
    except MarketInputError:
        raise
    except Exception as e:
        logger.error(f"Profit maximization failed: {e}")
        raise AppException(e, sys)


def _allocations(market: ThreeSidedMarket) -> Iterator[Allocation3]:
    def extend(b: int, stores: frozenset, couriers: frozenset, chosen: Tuple[Triple, ...]):
        if b == market.m:
            yield frozenset(chosen)
            return
        yield from extend(b + 1, stores, couriers, chosen)
        for s in range(market.n):
            if s in stores:
                continue
            for d in market.couriers_for(s):
                if d not in couriers:
                    yield from extend(b + 1, stores | {s}, couriers | {d}, chosen + ((b, s, d),))

    yield from extend(0, frozenset(), frozenset(), ())


def _min_compensation(market: ThreeSidedMarket, x: Allocation3) -> Fraction:
    """Least total compensation of a courier plan delivering ``x``: C_Ω plus the min courier prices."""
    omega = sorted(_orders_of(x))
    cost, _ = min_cost_cover(market, omega)
    total = cost
    for _, _, d in x:
        total += cost - min_cost_cover(market, omega, doubled=d)[0]
    return total


def brute_force_3sided(market: ThreeSidedMarket, mode: str, max_cells: Optional[int] = None) -> BruteForce3Report:
    """
    Exhaustive search over every feasible allocation.

    ``opt_welfare`` maximizes welfare; ``best_with_tip`` and ``best_without_tip``
    maximize welfare over certified equilibrium allocations; ``max_profit``
    maximizes without-tip profit, prices at the max Walrasian prices and
    couriers at their least supporting compensation.

    Raises:
        OracleLimitError: If m·n·l exceeds the size guard.
        MarketInputError: If ``mode`` is unknown.
    """
    if mode not in BRUTE_FORCE_MODES:
        raise MarketInputError(f"unknown mode {mode!r}; expected one of {BRUTE_FORCE_MODES}")
    limit = brute_force_max_cells if max_cells is None else max_cells
    cells = market.m * market.n * market.l
    if cells > limit:
        raise OracleLimitError(f"three-sided enumeration limited to {limit} cells, got {cells}")

    best_value: Optional[Fraction] = None
    best_alloc: Optional[Allocation3] = None
    evaluated = certified = 0
    for x in _allocations(market):
        evaluated += 1
        if mode == "opt_welfare":
            value = market.welfare(x)
        elif mode == "best_with_tip":
            if check_equilibrium_allocation(market, x) is None:
                continue
            value = market.welfare(x)
        else:
            state = without_tip_certificate(market, x)
            if state is None:
                continue
            value = market.welfare(x) if mode == "best_without_tip" else sum(state.prices, Fraction(0)) - _min_compensation(market, x)
        certified += 1
        if best_value is None or value > best_value:
            best_value, best_alloc = value, x

    logger.info(f"Brute force {mode}: {evaluated} allocations, {certified} certified, best {best_value}")
    return BruteForce3Report(mode, best_value, best_alloc, evaluated, certified)
