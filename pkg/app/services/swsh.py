"""
Revenue-optimal platform edges for single-world-seller homogeneous (SWSH) markets.

Every buyer knows at most one seller, so the world splits into seller
subgraphs (a seller with its world buyers), dangling buyers and dangling
sellers. Subgraphs ranked by their top buyer are joined into contiguous
cycles of at most three subgraphs, plus at most one contiguous chain running
from the smallest subgraph up to a terminal subgraph. Window revenues come
from the revenue engine, never from closed forms.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, Iterator, List, Optional, Tuple

from app.core.exception import MarketInputError
from app.core.logger import setup_logger
from app.markets.types import BipartiteMarket, Edge
from app.services.disruption import PlatformEdgeSet, platform_revenue, revenue_value
from app.utils.params import load_params

params = load_params()
disruption_params = params.get("disruption_params", {})

logger = setup_logger("SWSH", disruption_params.get("log_file_path", "disruption.log"))

Window = Tuple[int, int]


@dataclass(frozen=True)
class SellerSubgraph:
    seller: int
    buyers: Tuple[int, ...]
    top_value: Fraction
    second_value: Optional[Fraction] = None

    @property
    def top(self) -> int:
        return self.buyers[0]

    @property
    def others(self) -> Tuple[int, ...]:
        return self.buyers[1:]


@dataclass
class _Candidate:
    windows: List[Window]
    chain: List[Edge] = field(default_factory=list)
    world_trade: Optional[Edge] = None
    dangling_used: int = 0


def validate_swsh(world: BipartiteMarket) -> None:
    if world.goods_class != "homogeneous":
        raise MarketInputError("SWSH markets require homogeneous goods")
    degree: Dict[int, int] = {}
    for i, _ in world.world_edges:
        degree[i] = degree.get(i, 0) + 1
        if degree[i] > 1:
            raise MarketInputError(f"SWSH markets allow one world edge per buyer; buyer {i} has more")


def seller_subgraphs(world: BipartiteMarket, buyers: List[int], sellers: List[int]) -> List[SellerSubgraph]:
    """Subgraphs among ``buyers``/``sellers``, ranked by top value (desc) then seller index."""
    value = world.buyer_value
    allowed_buyers, allowed_sellers = set(buyers), set(sellers)
    members: Dict[int, List[int]] = {}
    for i, j in world.world_edges:
        if i in allowed_buyers and j in allowed_sellers:
            members.setdefault(j, []).append(i)
    subgraphs = []
    for j, group in members.items():
        group = sorted(group, key=lambda i: (-value(i), i))
        second = value(group[1]) if len(group) > 1 else None
        subgraphs.append(SellerSubgraph(j, tuple(group), value(group[0]), second))
    return sorted(subgraphs, key=lambda s: (-s.top_value, s.seller))


class SWSHPlanner:
    """
    Builds and scores cycle/chain configurations on a reduced (n = m) SWSH market.

    Typical usage example:
        >>> planner = SWSHPlanner(world, buyers=[0, 1, 2, 3], sellers=[0, 1, 2, 3])
        >>> edges, revenue = planner.solve()
    """

    def __init__(self, world: BipartiteMarket, buyers: List[int], sellers: List[int]):
        self.world = world
        self.order = lambda i: (-world.buyer_value(i), i)
        self.buyers = sorted(buyers, key=self.order)
        self.subs = seller_subgraphs(world, buyers, sellers)
        in_subgraph = {i for s in self.subs for i in s.buyers}
        hubs = {s.seller for s in self.subs}
        self.dangling_buyers = [i for i in self.buyers if i not in in_subgraph]
        self.dangling_sellers = sorted(j for j in sellers if j not in hubs)
        self._window_cache: Dict[Window, Fraction] = {}
        self._partition_cache: Dict[Window, Tuple[Fraction, List[Window]]] = {}

    def cycle_edges(self, a: int, b: int) -> List[Edge]:
        """Tops of subgraphs a..b buy around a ring; a lone subgraph trades on its world edge."""
        if a == b:
            return []
        ring = list(range(a, b + 1))
        return [(self.subs[ring[(k + 1) % len(ring)]].top, self.subs[ring[k]].seller) for k in range(len(ring))]

    def _pair_with_dangling(self, buyers: List[int], offset: int) -> List[Edge]:
        spare = self.dangling_sellers[offset:]
        ordered = sorted(buyers, key=self.order)
        return [(i, j) for i, j in zip(ordered, spare) if self.world.buyer_value(i) > 0]

    def window_revenue(self, a: int, b: int) -> Fraction:
        """Revenue of one cycle window with its non-top buyers fed by dangling sellers."""
        if (a, b) not in self._window_cache:
            others = [i for pos in range(a, b + 1) for i in self.subs[pos].others]
            core = self.cycle_edges(a, b) + self._pair_with_dangling(others, 0)
            self._window_cache[(a, b)] = revenue_value(self.world, frozenset(core))
        return self._window_cache[(a, b)]

    def best_partition(self, lo: int, hi: int) -> Tuple[Fraction, List[Window]]:
        """Best split of subgraphs lo..hi into contiguous windows of length 1 to 3."""
        if hi < lo:
            return Fraction(0), []
        if (lo, hi) not in self._partition_cache:
            best: Dict[int, Tuple[Fraction, List[Window]]] = {lo - 1: (Fraction(0), [])}
            for end in range(lo, hi + 1):
                options = []
                for length in (1, 2, 3):
                    start = end - length + 1
                    if start < lo:
                        break
                    prev_value, prev_windows = best[start - 1]
                    options.append((prev_value + self.window_revenue(start, end), prev_windows + [(start, end)]))
                best[end] = max(options, key=lambda o: o[0])
            self._partition_cache[(lo, hi)] = best[hi]
        return self._partition_cache[(lo, hi)]

    def chain(self, k: int, target: int) -> Tuple[List[Edge], Optional[Edge]]:
        """Chain over subgraphs k..last fed by the first dangling seller; s_k sells to ``target``."""
        last = len(self.subs) - 1
        edges = [(self.subs[last].top, self.dangling_sellers[0])]
        for pos in range(last, k, -1):
            edges.append((self.subs[pos - 1].top, self.subs[pos].seller))
        end = (target, self.subs[k].seller)
        if end in self.world.world_edges:
            return edges, end
        return edges + [end], None

    def candidates(self) -> List[_Candidate]:
        last = len(self.subs) - 1
        found = [_Candidate(self.best_partition(0, last)[1])]
        if not (self.dangling_sellers and self.subs):
            return found

        for k in range(len(self.subs)):
            prefix = self.best_partition(0, k - 1)[1]
            chain_members = [i for pos in range(k, last + 1) for i in self.subs[pos].others]
            for target in self.dangling_buyers + chain_members:
                edges, world_trade = self.chain(k, target)
                found.append(_Candidate(prefix, edges, world_trade, 1))
            # attach to a non-top buyer of a cycle window left of the chain
            for a in range(k):
                for b in range(a, min(a + 2, k - 1) + 1):
                    left = self.best_partition(0, a - 1)[1]
                    right = self.best_partition(b + 1, k - 1)[1]
                    for x in range(a, b + 1):
                        for target in self.subs[x].others:
                            edges, world_trade = self.chain(k, target)
                            found.append(_Candidate(left + [(a, b)] + right, edges, world_trade, 1))
        return found

    def assemble(self, candidate: _Candidate) -> PlatformEdgeSet:
        """Complete a candidate by feeding every unplaced buyer from a spare dangling seller."""
        core = list(candidate.chain)
        for a, b in candidate.windows:
            core += self.cycle_edges(a, b)
        placed = {i for i, _ in core}
        sold = {j for _, j in core}
        if candidate.world_trade:
            placed.add(candidate.world_trade[0])
            sold.add(candidate.world_trade[1])
        for s in self.subs:
            if s.seller not in sold:
                placed.add(s.top)
        leftovers = [i for i in self.buyers if i not in placed]
        return frozenset(core + self._pair_with_dangling(leftovers, candidate.dangling_used))

    def solve(self) -> Tuple[PlatformEdgeSet, Fraction]:
        best_edges, best_revenue = frozenset(), None
        options = self.candidates()
        for candidate in options:
            E_p = self.assemble(candidate)
            revenue = revenue_value(self.world, E_p)
            if best_revenue is None or revenue > best_revenue:
                best_edges, best_revenue = E_p, revenue
        logger.debug(f"SWSH scored {len(options)} configurations over {len(self.subs)} subgraphs")
        return best_edges, best_revenue


def top_buyer_choices(world: BipartiteMarket) -> Iterator[List[int]]:
    """
    Every set of min(n, m) top buyers, in value order.

    Buyers strictly above the cutoff value are always kept; when several tie at
    the cutoff each way of filling the remaining places is a separate choice.
    Zero-value ties never earn revenue, so they are filled by index.
    """
    order = lambda i: (-world.buyer_value(i), i)
    ranked = sorted(range(world.n), key=order)
    k = min(world.n, world.m)
    if world.n <= world.m or world.buyer_value(ranked[k - 1]) <= 0:
        yield ranked[:k]
        return
    cutoff = world.buyer_value(ranked[k - 1])
    above = [i for i in ranked if world.buyer_value(i) > cutoff]
    tied = [i for i in ranked if world.buyer_value(i) == cutoff]
    for extra in combinations(tied, k - len(above)):
        yield above + list(extra)


def swsh_optimal(world: BipartiteMarket) -> Tuple[PlatformEdgeSet, Fraction]:
    """
    Revenue-optimal platform edges for an SWSH market.

    When buyers outnumber sellers only the top-m buyers are kept, trying every
    choice among buyers tied at the cutoff; when sellers outnumber buyers the
    surplus dangling sellers are dropped. Each candidate configuration is
    completed into a full edge set and scored on the world. Ties between
    choices keep the first.

    Returns:
        Tuple[PlatformEdgeSet, Fraction]: Best platform edges and their revenue.

    Raises:
        MarketInputError: If goods are not homogeneous or a buyer has two world edges.
    """
    validate_swsh(world)
    if world.n == 0 or world.m == 0:
        return frozenset(), Fraction(0)

    best_edges, best_revenue, choices = frozenset(), None, 0
    for buyers in top_buyer_choices(world):
        choices += 1
        sellers = list(range(world.m))
        if world.m > world.n:
            hubs = {j for i, j in world.world_edges if i in buyers}
            dangling = [j for j in sellers if j not in hubs]
            drop = set(dangling[len(dangling) - (world.m - world.n):])
            sellers = [j for j in sellers if j not in drop]
        edges, revenue = SWSHPlanner(world, buyers, sellers).solve()
        if best_revenue is None or revenue > best_revenue:
            best_edges, best_revenue = edges, revenue

    revenue = platform_revenue(world, best_edges).revenue
    logger.info(f"SWSH optimum over {choices} top-buyer choices: {len(best_edges)} platform edges, revenue {revenue}")
    return best_edges, revenue
