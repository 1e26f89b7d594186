"""Exhaustive oracles that certify the polynomial algorithms on small instances."""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, Mapping, Optional, Tuple

from app.core.exception import MarketInputError, OracleLimitError
from app.core.logger import setup_logger
from app.services.bundling import PROFIT_TIE, BundlingMarket, bundle_profit
from app.services.delivery import brute_force_3sided
from app.services.disruption import brute_force_platform_edges
from app.services.platform_fees import enumerate_pure_equilibria, platform_revenue_and_poa
from app.utils.params import load_params
from app.workbench.instances import InstanceFile

params = load_params()
workbench_params = params.get("workbench_params", {})

log_file_path = workbench_params.get("log_file_path", "workbench.log")
bundle_max_sellers = int(workbench_params.get("bundle_max_sellers", 12))
three_sided_max_cells = int(workbench_params.get("three_sided_max_cells", 64))
bipartite_max_pairs = int(workbench_params.get("bipartite_max_pairs", 20))

logger = setup_logger("Oracles", log_file_path)

ORACLE_KINDS = ("platform_eq_enum", "platform_edges_enum", "three_sided_enum", "bundle_enum")


@dataclass(frozen=True)
class OracleReport:
    """
    Outcome of one exhaustive search.

    ``optimum`` is the best objective value (None when nothing qualified) and
    ``optima`` lists every structure attaining it.
    """

    kind: str
    optimum: Any
    optima: Tuple[Any, ...]
    evaluated: int
    details: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class BundleOptimum:
    members: Tuple[int, ...]
    profit: float
    contiguous: bool


def is_contiguous(members: Tuple[int, ...]) -> bool:
    """Indices form one unbroken run (the empty bundle counts)."""
    return not members or members[-1] - members[0] + 1 == len(members)


def brute_force_bundle(market: BundlingMarket, max_sellers: Optional[int] = None) -> BundleOptimum:
    """
    Best bundle over all 2^N subsets of quality-sorted sellers.

    Ties keep the first subset in size-then-lexicographic order, so the empty
    bundle wins whenever nothing is strictly profitable.
    """
    limit = bundle_max_sellers if max_sellers is None else max_sellers
    if market.n > limit:
        raise OracleLimitError(f"bundle enumeration limited to {limit} sellers, got {market.n}")
    qualities = sorted(market.qualities)
    best = BundleOptimum((), 0.0, True)
    for size in range(1, len(qualities) + 1):
        for members in combinations(range(len(qualities)), size):
            profit = bundle_profit([qualities[i] for i in members], market.sigma)
            if profit > best.profit + PROFIT_TIE:
                best = BundleOptimum(members, profit, is_contiguous(members))
    return best


def _platform_eq_enum(instance: InstanceFile, limits: Mapping[str, Any]) -> OracleReport:
    alpha = limits.get("alpha", "1/2")
    equilibria = enumerate_pure_equilibria(instance.market, alpha)
    reports = {P: platform_revenue_and_poa(instance.market, alpha, P) for P in equilibria}
    best = max((r.revenue for r in reports.values()), default=None)
    optima = tuple(P for P, r in reports.items() if r.revenue == best)
    return OracleReport(
        "platform_eq_enum", best, optima, 2 ** instance.market.m,
        {"equilibria": tuple(equilibria), "poa": {P: r.poa for P, r in reports.items()}},
    )


def _platform_edges_enum(instance: InstanceFile, limits: Mapping[str, Any]) -> OracleReport:
    restricted = bool(limits.get("restricted", False))
    result = brute_force_platform_edges(
        instance.market, restricted=restricted, max_pairs=int(limits.get("max_pairs", bipartite_max_pairs))
    )
    return OracleReport(
        "platform_edges_enum", result.revenue, result.optima, result.evaluated,
        {"welfare": result.welfare, "restricted": restricted},
    )


def _three_sided_enum(instance: InstanceFile, limits: Mapping[str, Any]) -> OracleReport:
    mode = limits.get("mode", "opt_welfare")
    report = brute_force_3sided(instance.market, mode, int(limits.get("max_cells", three_sided_max_cells)))
    optima = () if report.allocation is None else (report.allocation,)
    return OracleReport(
        "three_sided_enum", report.value, optima, report.evaluated,
        {"mode": mode, "certified": report.certified},
    )


def _bundle_enum(instance: InstanceFile, limits: Mapping[str, Any]) -> OracleReport:
    market = instance.market
    best = brute_force_bundle(market, int(limits.get("max_sellers", bundle_max_sellers)))
    qualities = sorted(market.qualities)
    return OracleReport(
        "bundle_enum", best.profit, (best.members,), 2 ** market.n,
        {"contiguous": best.contiguous, "qualities": tuple(qualities[i] for i in best.members)},
    )


_ORACLES = {
    "platform_eq_enum": ("bipartite", _platform_eq_enum),
    "platform_edges_enum": ("bipartite", _platform_edges_enum),
    "three_sided_enum": ("three_sided", _three_sided_enum),
    "bundle_enum": ("bundling", _bundle_enum),
}


def oracle(kind: str, instance: InstanceFile, limits: Optional[Mapping[str, Any]] = None) -> OracleReport:
    """
    Run one exhaustive oracle on ``instance``.

    Args:
        kind (str): One of ``ORACLE_KINDS``.
        instance (InstanceFile): Instance of the matching market kind.
        limits (Mapping, optional): Oracle options: ``alpha`` for
            ``platform_eq_enum``; ``restricted``/``max_pairs`` for
            ``platform_edges_enum``; ``mode``/``max_cells`` for
            ``three_sided_enum``; ``max_sellers`` for ``bundle_enum``.

    Raises:
        OracleLimitError: When the instance exceeds the named size guard.
        MarketInputError: On an unknown kind or a kind/instance mismatch.
    """
    if kind not in _ORACLES:
        raise MarketInputError(f"unknown oracle {kind!r}; expected one of {ORACLE_KINDS}")
    expected, run = _ORACLES[kind]
    if instance.kind != expected:
        raise MarketInputError(f"oracle {kind} needs a {expected} instance, got {instance.kind}")
    report = run(instance, dict(limits or {}))
    logger.info(f"Oracle {kind} on {instance.name or 'instance'}: optimum {report.optimum} after {report.evaluated} candidates")
    return report
