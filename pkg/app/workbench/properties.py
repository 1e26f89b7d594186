"""
Seeded property checks over random instances.

Each check draws its instances from ``random.Random(seed)``, compares a
polynomial algorithm or a bound against an exhaustive oracle, and reports the
instances that disagree. The acceptance suite and the tests share them.
"""

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

from app.core.exception import AppException
from app.core.logger import setup_logger
from app.markets.matching import welfare
from app.markets.three_sided import ThreeSidedMarket
from app.markets.types import BipartiteMarket
from app.services.bundling import BundlingMarket, monopoly_rev, rev_gradient_mu
from app.services.delivery import brute_force_3sided, efficient_with_tip_equilibrium, verify_equilibrium
from app.services.delivery_flow import optimal_welfare_single_minded, optimal_welfare_structured
from app.services.disruption import brute_force_platform_edges, homogeneous_extract
from app.services.platform_fees import enumerate_pure_equilibria, platform_revenue_and_poa
from app.services.shgb import shgb_optimal
from app.services.swsh import swsh_optimal
from app.utils.params import load_params
from app.workbench.oracles import brute_force_bundle

params = load_params()
workbench_params = params.get("workbench_params", {})

log_file_path = workbench_params.get("log_file_path", "workbench.log")
property_seed = int(workbench_params.get("property_seed", 20240601))

logger = setup_logger("Properties", log_file_path)

FEE_GRID = tuple(Fraction(k, 10) for k in range(1, 10))


@dataclass(frozen=True)
class PropertyReport:
    name: str
    checked: int
    failures: Tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.failures


def random_general(rng: random.Random, max_n: int = 3, max_m: int = 3) -> BipartiteMarket:
    """Values in {0, 1/2, ..., 3}; each pair is a world edge with probability 0.4."""
    n, m = rng.randint(1, max_n), rng.randint(1, max_m)
    values = [[Fraction(rng.randint(0, 6), 2) for _ in range(m)] for _ in range(n)]
    world = frozenset((i, j) for i in range(n) for j in range(m) if rng.random() < 0.4)
    return BipartiteMarket(n, m, values, world)


def random_homogeneous(rng: random.Random, max_n: int = 3, max_m: int = 3, one_world_seller: bool = False) -> BipartiteMarket:
    """Homogeneous market with half-integer values and a random world graph."""
    n, m = rng.randint(1, max_n), rng.randint(1, max_m)
    values = [Fraction(rng.randint(1, 12), 2) for _ in range(n)]
    if one_world_seller:
        world = [(i, rng.randrange(m)) for i in range(n) if rng.random() < 0.7]
    else:
        world = [(i, j) for i in range(n) for j in range(m) if rng.random() < 0.4]
    return BipartiteMarket.homogeneous(values, m, world)


def random_swsh(rng: random.Random, n: int, m: int) -> BipartiteMarket:
    """At most one world seller per buyer; values in {1/2, ..., 4} so ties are common."""
    values = [Fraction(rng.randint(1, 8), 2) for _ in range(n)]
    world = [(i, rng.randrange(m)) for i in range(n) if rng.random() < 0.7]
    return BipartiteMarket.homogeneous(values, m, world)


def random_shgb(rng: random.Random, max_n: int = 3, max_m: int = 3) -> BipartiteMarket:
    """Identity goods at c = 1, world degree at most two, no seller pair shared twice."""
    n, m = rng.randint(1, max_n), rng.randint(1, max_m)
    pairs, world = set(), set()
    for i in range(n):
        sellers = rng.sample(range(m), min(m, rng.randint(0, 2)))
        if len(sellers) == 2:
            key = tuple(sorted(sellers))
            if key in pairs:
                sellers = sellers[:1]
            pairs.add(key)
        world.update((i, j) for j in sellers)
    return BipartiteMarket(n, m, [[1] * m for _ in range(n)], frozenset(world), "identity")


def random_split_market(rng: random.Random, structure: str, max_size: int = 3) -> ThreeSidedMarket:
    """Courier costs c(b, s) + c_d(s) for store_split or c(b, s) + c_d(b) for buyer_split."""
    m, n, l = (rng.randint(1, max_size) for _ in range(3))
    values = [[rng.randint(0, 6) for _ in range(n)] for _ in range(m)]
    base = [[rng.randint(0, 3) for _ in range(n)] for _ in range(m)]
    if structure == "store_split":
        part = [[rng.randint(0, 3) for _ in range(n)] for _ in range(l)]
        costs = [[[base[b][s] + part[d][s] for s in range(n)] for b in range(m)] for d in range(l)]
    else:
        part = [[rng.randint(0, 3) for _ in range(m)] for _ in range(l)]
        costs = [[[base[b][s] + part[d][b] for s in range(n)] for b in range(m)] for d in range(l)]
    return ThreeSidedMarket(values, costs, structure)


def random_single_minded(rng: random.Random, max_size: int = 3) -> ThreeSidedMarket:
    """Every buyer values one store; courier costs are arbitrary."""
    m, n, l = (rng.randint(1, max_size) for _ in range(3))
    values = [[0] * n for _ in range(m)]
    for b in range(m):
        values[b][rng.randrange(n)] = rng.randint(1, 6)
    costs = [[[rng.randint(0, 4) for _ in range(n)] for _ in range(m)] for _ in range(l)]
    return ThreeSidedMarket(values, costs, "single_minded_buyers")


def random_qualities(rng: random.Random, max_n: int = 6) -> BundlingMarket:
    n = rng.randint(1, max_n)
    return BundlingMarket(tuple(rng.uniform(0.2, 5.0) for _ in range(n)), rng.uniform(0.3, 2.0))


def _run(name: str, checks: Sequence[Callable[[], Optional[str]]]) -> PropertyReport:
    failures: List[str] = []
    for check in checks:
        try:
            problem = check()
        except AppException as e:
            problem = e.reason
        if problem:
            failures.append(problem)
    report = PropertyReport(name, len(checks), tuple(failures))
    if report.passed:
        logger.info(f"{name}: {report.checked} instances hold")
    else:
        logger.warning(f"{name}: {len(failures)} of {report.checked} fail, first: {failures[0]}")
    return report


def poa_bound(instances: int = 200, max_n: int = 5, max_m: int = 5, alphas: Sequence[Fraction] = FEE_GRID, seed: int = property_seed) -> PropertyReport:
    """Every pure platform equilibrium has PoA at most (2 − α)/(1 − α)."""
    rng = random.Random(seed)

    def check(market: BipartiteMarket) -> Optional[str]:
        for alpha in alphas:
            bound = (2 - alpha) / (1 - alpha)
            for P in enumerate_pure_equilibria(market, alpha):
                report = platform_revenue_and_poa(market, alpha, P)
                if report.optimal_welfare and report.poa > bound:
                    return f"alpha={alpha} P={sorted(P)}: PoA {report.poa} above {bound} on {market.values}"
        return None

    markets = [random_general(rng, max_n, max_m) for _ in range(instances)]
    return _run("poa_bound", [lambda market=market: check(market) for market in markets])


def _revenue_check(solver, market: BipartiteMarket) -> Optional[str]:
    _, revenue = solver(market)
    oracle = brute_force_platform_edges(market, restricted=True, max_pairs=market.n * market.m).revenue
    if revenue != oracle:
        return f"revenue {revenue} but oracle {oracle} on values {market.values}, world {sorted(market.world_edges)}"
    return None


def swsh_oracle(instances: int = 50, max_size: int = 4, seed: int = property_seed) -> PropertyReport:
    """SWSH revenue on random n = m markets equals the exhaustive optimum."""
    rng = random.Random(seed)
    markets = []
    for _ in range(instances):
        size = rng.randint(1, max_size)
        markets.append(random_swsh(rng, size, size))
    return _run("swsh_oracle", [lambda market=market: _revenue_check(swsh_optimal, market) for market in markets])


def shgb_oracle(instances: int = 50, max_n: int = 8, max_m: int = 3, seed: int = property_seed) -> PropertyReport:
    """SHGB revenue on random identity-goods markets equals the exhaustive optimum."""
    rng = random.Random(seed)
    markets = [random_shgb(rng, max_n, max_m) for _ in range(instances)]
    return _run("shgb_oracle", [lambda market=market: _revenue_check(shgb_optimal, market) for market in markets])


def homogeneous_alignment(instances: int = 100, max_n: int = 5, max_m: int = 5, seed: int = property_seed) -> PropertyReport:
    """Revenue-optimal edge sets reach W*, and extraction earns at least W* − W(G_w)."""
    rng = random.Random(seed)

    def check(market: BipartiteMarket) -> Optional[str]:
        optimal = welfare(market, market.all_pairs())
        result = brute_force_platform_edges(market, restricted=True, max_pairs=market.n * market.m)
        for E_p in result.optima:
            if welfare(market, market.world_edges | E_p) != optimal:
                return f"optimum {sorted(E_p)} misses W* = {optimal}"
        _, extracted = homogeneous_extract(market)
        floor = optimal - welfare(market, market.world_edges)
        if extracted < floor:
            return f"extraction {extracted} below W* − W(G_w) = {floor}"
        return None

    markets = [random_homogeneous(rng, max_n, max_m) for _ in range(instances)]
    return _run("homogeneous_alignment", [lambda market=market: check(market) for market in markets])


def _flow_check(market: ThreeSidedMarket, flow) -> Optional[str]:
    _, optimum = flow(market)
    exhaustive = brute_force_3sided(market, "opt_welfare").value
    if optimum != exhaustive:
        return f"{market.cost_structure}: flow optimum {optimum} but exhaustive {exhaustive}"
    state, allocation = efficient_with_tip_equilibrium(market)
    if market.welfare(allocation) != optimum:
        return f"{market.cost_structure}: certified welfare {market.welfare(allocation)} below {optimum}"
    problems = verify_equilibrium(market, state.prices, state.compensation, allocation, state.tips)
    if problems:
        return f"{market.cost_structure}: certified state fails {problems[0].condition}"
    return None


def flow_equilibria(instances: int = 50, max_size: int = 4, seed: int = property_seed) -> PropertyReport:
    """Store-split, buyer-split and single-minded markets: certified welfare = flow optimum = exhaustive optimum."""
    rng = random.Random(seed)
    checks = []
    for _ in range(instances):
        for structure in ("store_split", "buyer_split"):
            market = random_split_market(rng, structure, max_size)
            checks.append(lambda market=market: _flow_check(market, optimal_welfare_structured))
        market = random_single_minded(rng, max_size)
        checks.append(lambda market=market: _flow_check(market, optimal_welfare_single_minded))
    return _run("flow_equilibria", checks)


def bundle_contiguity(instances: int = 100, max_n: int = 10, seed: int = property_seed) -> PropertyReport:
    """The exhaustive best bundle is a contiguous run of the sorted qualities."""
    rng = random.Random(seed)

    def check(market: BundlingMarket) -> Optional[str]:
        best = brute_force_bundle(market)
        if not best.contiguous:
            return f"best bundle {best.members} not contiguous for {market.qualities}"
        return None

    markets = [random_qualities(rng, max_n) for _ in range(instances)]
    return _run("bundle_contiguity", [lambda market=market: check(market) for market in markets])


def rev_gradient_grid(
    points: int = 20,
    mu_range: Tuple[float, float] = (0.5, 10.0),
    sigma_range: Tuple[float, float] = (0.25, 5.0),
    h: float = 1e-5,
    rel: float = 1e-6,
) -> PropertyReport:
    """dRev/dμ against central differences on a points × points (μ, σ) grid."""

    def axis(lo: float, hi: float) -> List[float]:
        return [lo + (hi - lo) * k / (points - 1) for k in range(points)] if points > 1 else [lo]

    def check(mu: float, sigma: float) -> Optional[str]:
        numeric = (monopoly_rev(mu + h, sigma)[0] - monopoly_rev(mu - h, sigma)[0]) / (2 * h)
        exact = rev_gradient_mu(mu, sigma)
        if not math.isclose(exact, numeric, rel_tol=rel):
            return f"mu={mu} sigma={sigma}: gradient {exact} vs central difference {numeric}"
        return None

    grid = [(mu, sigma) for mu in axis(*mu_range) for sigma in axis(*sigma_range)]
    return _run("rev_gradient_grid", [lambda mu=mu, sigma=sigma: check(mu, sigma) for mu, sigma in grid])
