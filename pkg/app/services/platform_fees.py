import sys
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from app.core.exception import AppException, MarketInputError, OracleLimitError
from app.core.logger import setup_logger
from app.markets.matching import market_weights, max_weight_matching, max_weight_value
from app.markets.types import BipartiteMarket, CompetitiveEquilibrium, Edge, Violation
from app.markets.walrasian import max_walrasian_prices, seller_removed_welfare
from app.utils.params import load_params
from app.utils.rational import RatLike, to_rat

params = load_params()
platform_fees_params = params.get("platform_fees_params", {})

log_file_path = platform_fees_params.get("log_file_path", "platform_fees.log")
audit_max_iters = int(platform_fees_params.get("audit_max_iters", 64))
enumeration_max_sellers = int(platform_fees_params.get("enumeration_max_sellers", 12))
price_cache_size = int(platform_fees_params.get("price_cache_size", 65536))

logger = setup_logger("PlatformFees", log_file_path)

SellerSet = FrozenSet[int]


@dataclass(frozen=True)
class SellerGain:
    seller: int
    p_on: Fraction
    p_off: Fraction
    phi: Fraction


@dataclass(frozen=True)
class PlatformOutcome:
    on_platform: SellerSet
    alpha: Fraction
    equilibrium: CompetitiveEquilibrium


@dataclass(frozen=True)
class FeeReport:
    revenue: Fraction
    welfare: Fraction
    optimal_welfare: Fraction
    poa: Union[Fraction, float]


@dataclass(frozen=True)
class AuditResult:
    converged: bool
    profile: SellerSet
    cycle: Tuple[SellerSet, ...]
    iterations: int


@dataclass(frozen=True)
class FeeGridRow:
    alpha: Fraction
    on_platform: Optional[SellerSet]
    revenue: Fraction
    poa: Union[Fraction, float, None]
    equilibria: int


def _alpha(alpha: RatLike) -> Fraction:
    alpha = to_rat(alpha)
    if not 0 <= alpha <= 1:
        raise MarketInputError(f"fee fraction must lie in [0, 1], got {alpha}")
    return alpha


def _sellers(market: BipartiteMarket, P: Iterable[int]) -> SellerSet:
    P = frozenset(int(j) for j in P)
    for j in P:
        if not 0 <= j < market.m:
            raise MarketInputError(f"seller {j} out of range")
    return P


def _require_homogeneous(market: BipartiteMarket) -> None:
    if market.goods_class != "homogeneous":
        logger.error(f"Rejected {market.goods_class} market: requires homogeneous goods")
        raise MarketInputError("requires homogeneous goods")


def platform_graph(market: BipartiteMarket, P: Iterable[int]) -> FrozenSet[Edge]:
    """World edges plus every buyer connected to every seller in ``P``."""
    P = _sellers(market, P)
    return market.world_edges | frozenset((i, j) for i in range(market.n) for j in P)


def seller_price(market: BipartiteMarket, P: Iterable[int], j: int) -> Fraction:
    """Max Walrasian price of seller ``j`` in G(P)."""
    return _cached_price(market, _sellers(market, P), j)


@lru_cache(maxsize=price_cache_size)
def _cached_price(market: BipartiteMarket, P: SellerSet, j: int) -> Fraction:
    weights = market_weights(market, platform_graph(market, P))
    return max_weight_value(weights) - seller_removed_welfare(weights, j)


def on_off_prices(market: BipartiteMarket, P: Iterable[int], j: int) -> Tuple[Fraction, Fraction]:
    """
    Prices seller ``j`` would get on and off the platform.

    Args:
        market (BipartiteMarket): The market.
        P (Iterable[int]): Sellers currently on the platform.
        j (int): The seller considering its choice.

    Returns:
        Tuple[Fraction, Fraction]: ``(p_on, p_off)`` from G(P ∪ {j}) and G(P ∖ {j}).
    """
    P = _sellers(market, P)
    if not 0 <= j < market.m:
        raise MarketInputError(f"seller {j} out of range")
    return seller_price(market, P | {j}, j), seller_price(market, P - {j}, j)


def seller_gains(market: BipartiteMarket, alpha: RatLike, P: Iterable[int]) -> List[SellerGain]:
    """φ_j = (1 − α)·p_on − p_off for every seller off the platform."""
    alpha = _alpha(alpha)
    P = _sellers(market, P)
    gains = []
    for j in range(market.m):
        if j in P:
            continue
        p_on, p_off = on_off_prices(market, P, j)
        gains.append(SellerGain(j, p_on, p_off, (1 - alpha) * p_on - p_off))
    return gains


def find_pure_equilibrium(market: BipartiteMarket, alpha: RatLike) -> SellerSet:
    """
    Grow the on-platform set one seller at a time while the best gain is nonnegative.

    Among sellers with the largest gain, the one with the lowest off-platform
    price joins; remaining ties go to the lowest index.

    Raises:
        MarketInputError: If the market is not homogeneous.
    """
    _require_homogeneous(market)
    alpha = _alpha(alpha)
    P: SellerSet = frozenset()
    while len(P) < market.m:
        gains = seller_gains(market, alpha, P)
        best = max(g.phi for g in gains)
        chosen = min((g for g in gains if g.phi == best), key=lambda g: (g.p_off, g.seller))
        if chosen.phi < 0:
            break
        P = P | {chosen.seller}
        logger.debug(f"alpha={alpha}: seller {chosen.seller} joins with phi={chosen.phi}")
    logger.info(f"Pure equilibrium at alpha={alpha}: P={sorted(P)}")
    return P


def verify_platform_equilibrium(market: BipartiteMarket, alpha: RatLike, P: Iterable[int]) -> List[Violation]:
    """Every member weakly prefers the platform and every outsider weakly prefers staying off."""
    alpha = _alpha(alpha)
    P = _sellers(market, P)
    violations = []
    for j in range(market.m):
        p_on, p_off = on_off_prices(market, P, j)
        kept = (1 - alpha) * p_on
        if j in P and kept < p_off:
            violations.append(Violation("member-prefers-off", ("seller", j), f"{kept} < {p_off}"))
        elif j not in P and kept > p_off:
            violations.append(Violation("outsider-prefers-on", ("seller", j), f"{kept} > {p_off}"))
    return violations


def _break_even_fee(gain: SellerGain) -> Optional[Fraction]:
    if gain.p_off == 0:
        return Fraction(1)
    if gain.p_on == 0:
        return None
    fee = 1 - gain.p_off / gain.p_on
    return fee if fee >= 0 else None


def sweep_alpha(market: BipartiteMarket) -> List[Tuple[Fraction, SellerSet]]:
    """
    Lower the fee from 1 towards 0 and record each seller as it joins.

    Each entry is ``(alpha, P)``: ``P`` is the equilibrium set once the fee has
    fallen to ``alpha``. Several sellers can join at the same fee.
    """
    _require_homogeneous(market)
    current = Fraction(1)
    P: SellerSet = frozenset()
    breakpoints: List[Tuple[Fraction, SellerSet]] = []
    while len(P) < market.m:
        candidates = []
        for gain in seller_gains(market, Fraction(0), P):
            fee = _break_even_fee(gain)
            if fee is not None:
                candidates.append((-fee, gain.p_off, gain.seller, fee))
        if not candidates:
            break
        _, _, seller, fee = min(candidates)
        current = min(current, fee)
        P = P | {seller}
        breakpoints.append((current, P))
        logger.debug(f"sweep: seller {seller} joins at alpha={current}")
    logger.info(f"Sweep produced {len(breakpoints)} breakpoints")
    return breakpoints


def best_response_audit(market: BipartiteMarket, alpha: RatLike, max_iters: int = audit_max_iters) -> AuditResult:
    """
    Run single-seller best responses from the empty profile.

    Sellers are scanned round-robin starting after the last deviator and only
    strict improvements count as deviations.

    Returns:
        AuditResult: Fixed point (``converged``) or the first repeating cycle of profiles.
    """
    if max_iters < 1:
        raise MarketInputError("max_iters must be at least 1")
    alpha = _alpha(alpha)
    P: SellerSet = frozenset()
    history: List[SellerSet] = [P]
    start = 0
    for iteration in range(1, max_iters + 1):
        deviator = None
        for step in range(market.m):
            j = (start + step) % market.m
            p_on, p_off = on_off_prices(market, P, j)
            kept = (1 - alpha) * p_on
            if (j in P and kept < p_off) or (j not in P and kept > p_off):
                deviator = j
                break
        if deviator is None:
            logger.info(f"Best responses converged to {sorted(P)} after {iteration - 1} moves")
            return AuditResult(True, P, (), iteration - 1)
        P = P ^ {deviator}
        start = deviator + 1
        if P in history:
            cycle = tuple(history[history.index(P):])
            logger.info(f"Best responses cycle through {len(cycle)} profiles")
            return AuditResult(False, P, cycle, iteration)
        history.append(P)
    logger.warning(f"Best-response audit stopped after {max_iters} iterations without a verdict")
    return AuditResult(False, P, (), max_iters)


def platform_revenue_and_poa(market: BipartiteMarket, alpha: RatLike, P: Iterable[int]) -> FeeReport:
    """
    Platform revenue α·Σ_{j∈P} p̄_j(G(P)) and the welfare ratio against the complete graph.

    PoA is reported as ``math.inf`` when G(P) has zero welfare.
    """
    try:
        alpha = _alpha(alpha)
        P = _sellers(market, P)
        edges = platform_graph(market, P)
        prices = max_walrasian_prices(market, edges)
        welfare = max_weight_value(market_weights(market, edges))
        optimal = max_weight_value(market_weights(market, market.all_pairs()))
        revenue = alpha * sum((prices[j] for j in P), Fraction(0))
        poa = optimal / welfare if welfare else math.inf
        return FeeReport(revenue, welfare, optimal, poa)
    except MarketInputError:
        raise
    except Exception as e:
        logger.error(f"Revenue/PoA evaluation failed: {e}")
        raise AppException(e, sys)


def platform_outcome(market: BipartiteMarket, alpha: RatLike, P: Iterable[int]) -> PlatformOutcome:
    """Equilibrium induced on G(P) with max Walrasian prices."""
    alpha = _alpha(alpha)
    P = _sellers(market, P)
    edges = platform_graph(market, P)
    matching, weight = max_weight_matching(market, edges)
    return PlatformOutcome(P, alpha, CompetitiveEquilibrium(matching, max_walrasian_prices(market, edges), weight))


def same_price_check(market: BipartiteMarket, P: Iterable[int]) -> bool:
    """All transacting on-platform sellers share one max price (homogeneous goods)."""
    _require_homogeneous(market)
    outcome = platform_outcome(market, 0, P)
    sold = {j for _, j in outcome.equilibrium.matching}
    prices = {outcome.equilibrium.prices[j] for j in outcome.on_platform if j in sold}
    return len(prices) <= 1


def enumerate_pure_equilibria(market: BipartiteMarket, alpha: RatLike) -> List[SellerSet]:
    """Every seller subset that verifies, in size-then-lexicographic order."""
    alpha = _alpha(alpha)
    if market.m > enumeration_max_sellers:
        raise OracleLimitError(f"subset enumeration limited to {enumeration_max_sellers} sellers, got {market.m}")
    found = []
    for size in range(market.m + 1):
        for subset in combinations(range(market.m), size):
            if not verify_platform_equilibrium(market, alpha, subset):
                found.append(frozenset(subset))
    return found


def optimal_fee_grid(market: BipartiteMarket, alphas: Sequence[RatLike]) -> List[FeeGridRow]:
    """
    Revenue-optimal equilibrium per fee on a grid, with the platform picking its favourite equilibrium.

    Ties in revenue go to the first set in size-then-lexicographic order.
    """
    rows = []
    for raw in alphas:
        alpha = _alpha(raw)
        best = None
        equilibria = enumerate_pure_equilibria(market, alpha)
        for P in equilibria:
            report = platform_revenue_and_poa(market, alpha, P)
            if best is None or report.revenue > best[1].revenue:
                best = (P, report)
        if best is None:
            rows.append(FeeGridRow(alpha, None, Fraction(0), None, 0))
        else:
            rows.append(FeeGridRow(alpha, best[0], best[1].revenue, best[1].poa, len(equilibria)))
        logger.info(f"alpha={alpha}: {len(equilibria)} equilibria, best revenue {rows[-1].revenue}")
    return rows
