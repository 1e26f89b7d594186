"""Market data types shared by every component."""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

from app.core.exception import MarketInputError
from app.utils.rational import RatLike, to_rat

Edge = Tuple[int, int]
Matching = FrozenSet[Edge]
PriceVector = Tuple[Fraction, ...]

GOODS_CLASSES = ("general", "homogeneous", "identity")


@dataclass(frozen=True)
class BipartiteMarket:
    """
    Unit-demand buyers facing unit-supply sellers.

    ``values[i][j]`` is buyer ``i``'s exact value for seller ``j``. World edges
    are the pairs that can trade without any platform.

    Typical usage example:
        >>> market = BipartiteMarket.homogeneous(["10", "4"], m=2, world_edges=[(0, 0)])
        >>> market.value(0, 1)
        Fraction(10, 1)
    """

    n: int
    m: int
    values: Tuple[Tuple[Fraction, ...], ...]
    world_edges: FrozenSet[Edge] = frozenset()
    goods_class: str = "general"

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise MarketInputError(f"negative market size n={self.n}, m={self.m}")
        if self.goods_class not in GOODS_CLASSES:
            raise MarketInputError(f"unknown goods class {self.goods_class!r}")

        rows = [tuple(to_rat(v) for v in row) for row in self.values]
        if len(rows) != self.n or any(len(row) != self.m for row in rows):
            raise MarketInputError(f"values must be a {self.n}x{self.m} matrix")
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                if v < 0:
                    raise MarketInputError(f"negative value at buyer {i}, seller {j}")
        object.__setattr__(self, "values", tuple(rows))

        raw_edges = list(self.world_edges)
        edges = frozenset((int(i), int(j)) for i, j in raw_edges)
        if len(edges) != len(raw_edges):
            raise MarketInputError("world edges contain duplicates")
        check_edges(self.n, self.m, edges)
        object.__setattr__(self, "world_edges", edges)

        if self.goods_class == "homogeneous":
            for i, row in enumerate(rows):
                if len(set(row)) > 1:
                    raise MarketInputError(f"homogeneous market: buyer {i} values sellers differently")
        elif self.goods_class == "identity":
            nonzero = {v for row in rows for v in row if v != 0}
            if len(nonzero) > 1:
                raise MarketInputError("identity market: nonzero values must all be equal")

    @classmethod
    def homogeneous(
        cls,
        buyer_values: Sequence[RatLike],
        m: int,
        world_edges: Iterable[Edge] = (),
    ) -> "BipartiteMarket":
        values = [[to_rat(v)] * m for v in buyer_values]
        return cls(len(values), m, values, frozenset(world_edges), "homogeneous")

    def value(self, i: int, j: int) -> Fraction:
        return self.values[i][j]

    def buyer_value(self, i: int) -> Fraction:
        """Value of buyer ``i`` in a homogeneous market (0 when there are no sellers)."""
        return self.values[i][0] if self.m else Fraction(0)

    def all_pairs(self) -> FrozenSet[Edge]:
        return frozenset((i, j) for i in range(self.n) for j in range(self.m))

    def non_world_pairs(self) -> List[Edge]:
        return sorted(self.all_pairs() - self.world_edges)

    def with_world_edges(self, edges: Iterable[Edge]) -> "BipartiteMarket":
        return BipartiteMarket(self.n, self.m, self.values, frozenset(edges), self.goods_class)


@dataclass(frozen=True)
class Violation:
    """One failed equilibrium condition, named and located."""

    condition: str
    index: Optional[object] = None
    detail: str = ""

    def __str__(self) -> str:
        where = "" if self.index is None else f" at {self.index}"
        return f"{self.condition}{where}: {self.detail}" if self.detail else f"{self.condition}{where}"


@dataclass(frozen=True)
class CompetitiveEquilibrium:
    matching: Matching
    prices: PriceVector
    welfare: Fraction = field(default=Fraction(0))


def check_edges(n: int, m: int, edges: Iterable[Edge]) -> FrozenSet[Edge]:
    """Validate that every pair indexes an existing buyer and seller."""
    result = frozenset(edges)
    for i, j in result:
        if not (0 <= i < n and 0 <= j < m):
            raise MarketInputError(f"edge ({i}, {j}) out of range for {n} buyers and {m} sellers")
    return result


def check_matching(edges: FrozenSet[Edge], matching: Iterable[Edge]) -> List[str]:
    """Return human-readable feasibility problems of ``matching`` (empty when feasible)."""
    problems = []
    buyers, sellers = set(), set()
    for i, j in matching:
        if (i, j) not in edges:
            problems.append(f"pair ({i}, {j}) is not a permitted edge")
        if i in buyers:
            problems.append(f"buyer {i} matched twice")
        if j in sellers:
            problems.append(f"seller {j} matched twice")
        buyers.add(i)
        sellers.add(j)
    return problems
