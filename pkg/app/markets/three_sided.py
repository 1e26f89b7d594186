"""Three-sided delivery markets: buyers, stores and couriers."""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from app.core.exception import MarketInputError
from app.utils.rational import RatLike, to_rat

Order = Tuple[int, int]
Triple = Tuple[int, int, int]
Allocation3 = FrozenSet[Triple]
Matrix = Tuple[Tuple[Fraction, ...], ...]

COST_STRUCTURES = ("general", "store_split", "buyer_split", "single_minded_buyers", "single_store_couriers")


def _matrix(rows: Sequence[Sequence[RatLike]], n_rows: int, n_cols: int, what: str) -> Matrix:
    result = tuple(tuple(to_rat(v) for v in row) for row in rows)
    if len(result) != n_rows or any(len(row) != n_cols for row in result):
        raise MarketInputError(f"{what} must be a {n_rows}x{n_cols} matrix")
    for r, row in enumerate(result):
        for c, v in enumerate(row):
            if v < 0:
                raise MarketInputError(f"negative {what} entry at ({r}, {c})")
    return result


@dataclass(frozen=True)
class ThreeSidedMarket:
    """
    ``values[b][s]`` is buyer b's value for store s and ``costs[d][b][s]`` courier
    d's cost of delivering order (b, s).

    With ``single_store_couriers`` each courier d delivers only for store
    ``courier_store[d]``; its costs for other stores are ignored.

    Typical usage example:
        >>> market = ThreeSidedMarket([["3"], ["10"]], [[["0"], ["11"]], [["1"], ["12"]]], "store_split")
        >>> market.cost(1, 0, 0)
        Fraction(1, 1)
    """

    values: Matrix
    costs: Tuple[Matrix, ...]
    cost_structure: str = "general"
    courier_store: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.cost_structure not in COST_STRUCTURES:
            raise MarketInputError(f"unknown cost structure {self.cost_structure!r}")
        n_buyers = len(self.values)
        n_stores = len(self.values[0]) if n_buyers else 0
        values = _matrix(self.values, n_buyers, n_stores, "values")
        costs = tuple(_matrix(c, n_buyers, n_stores, f"costs of courier {d}") for d, c in enumerate(self.costs))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "costs", costs)

        if self.courier_store is not None:
            mapping = tuple(int(s) for s in self.courier_store)
            if len(mapping) != len(costs) or any(not 0 <= s < n_stores for s in mapping):
                raise MarketInputError("courier_store must name one valid store per courier")
            object.__setattr__(self, "courier_store", mapping)

        problem = structure_problem(self, self.cost_structure)
        if problem:
            raise MarketInputError(f"{self.cost_structure} structure violated: {problem}")

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def n(self) -> int:
        return len(self.values[0]) if self.values else 0

    @property
    def l(self) -> int:
        return len(self.costs)

    def value(self, b: int, s: int) -> Fraction:
        return self.values[b][s]

    def cost(self, d: int, b: int, s: int) -> Fraction:
        return self.costs[d][b][s]

    def can_deliver(self, d: int, s: int) -> bool:
        return self.courier_store is None or self.courier_store[d] == s

    def couriers_for(self, s: int) -> List[int]:
        return [d for d in range(self.l) if self.can_deliver(d, s)]

    def orders(self) -> List[Order]:
        return [(b, s) for b in range(self.m) for s in range(self.n)]

    def deliverable(self, d: int) -> List[Order]:
        return [(b, s) for b, s in self.orders() if self.can_deliver(d, s)]

    def total_value(self) -> Fraction:
        return sum((v for row in self.values for v in row), Fraction(0))

    def total_cost(self) -> Fraction:
        return sum((self.cost(d, b, s) for d in range(self.l) for b, s in self.deliverable(d)), Fraction(0))

    def min_cost(self, b: int, s: int) -> Optional[Fraction]:
        """Cheapest courier cost of order (b, s); None when no courier serves the store."""
        options = [self.cost(d, b, s) for d in self.couriers_for(s)]
        return min(options) if options else None

    def welfare(self, x: Iterable[Triple]) -> Fraction:
        return sum((self.value(b, s) - self.cost(d, b, s) for b, s, d in x), Fraction(0))

    def with_structure(self, cost_structure: str) -> "ThreeSidedMarket":
        return ThreeSidedMarket(self.values, self.costs, cost_structure, self.courier_store)


@dataclass(frozen=True)
class TipState:
    """Prices per store, plus compensations and tips per (buyer, store)."""

    prices: Tuple[Fraction, ...]
    compensation: Matrix
    tips: Optional[Matrix] = None

    def w(self, b: int, s: int) -> Fraction:
        return self.compensation[b][s]

    def t(self, b: int, s: int) -> Fraction:
        return self.tips[b][s] if self.tips is not None else Fraction(0)


@dataclass(frozen=True)
class CourierPlan:
    compensation: Matrix
    allocation: Allocation3
    utilities: Tuple[Fraction, ...]
    cover_cost: Fraction = field(default=Fraction(0))


def zeros(rows: int, cols: int) -> Matrix:
    return tuple(tuple(Fraction(0) for _ in range(cols)) for _ in range(rows))


def matrix_from(entries: Dict[Order, Fraction], rows: int, cols: int) -> Matrix:
    return tuple(tuple(entries.get((r, c), Fraction(0)) for c in range(cols)) for r in range(rows))


def structure_problem(market: ThreeSidedMarket, structure: str) -> Optional[str]:
    """Why ``market`` does not have ``structure``, or None when it does."""
    if structure == "general":
        return None
    if structure == "single_store_couriers":
        return None if market.courier_store is not None else "courier_store missing"
    if structure == "store_split":
        for d in range(market.l):
            for s in range(market.n):
                gaps = {market.cost(d, b, s) - market.cost(0, b, s) for b in range(market.m)}
                if len(gaps) > 1:
                    return f"courier {d} cost at store {s} does not split off a buyer-independent part"
    elif structure == "buyer_split":
        for d in range(market.l):
            for b in range(market.m):
                gaps = {market.cost(d, b, s) - market.cost(0, b, s) for s in range(market.n)}
                if len(gaps) > 1:
                    return f"courier {d} cost for buyer {b} does not split off a store-independent part"
    elif structure == "single_minded_buyers":
        for b, row in enumerate(market.values):
            if sum(1 for v in row if v > 0) > 1:
                return f"buyer {b} values more than one store"
    return None


def infer_cost_structure(market: ThreeSidedMarket) -> List[str]:
    """Every structure the market satisfies, or ["general"] when none does."""
    found = [s for s in ("store_split", "buyer_split", "single_minded_buyers") if structure_problem(market, s) is None]
    if market.courier_store is not None:
        found.append("single_store_couriers")
    return found or ["general"]


def check_allocation(market: ThreeSidedMarket, x: Iterable[Triple]) -> Allocation3:
    """Validate a three-sided allocation: indices in range, unit constraints, deliverable triples."""
    x = frozenset((int(b), int(s), int(d)) for b, s, d in x)
    for axis, name in ((0, "buyer"), (1, "store"), (2, "courier")):
        seen = [t[axis] for t in x]
        if len(seen) != len(set(seen)):
            raise MarketInputError(f"allocation uses a {name} twice")
    for b, s, d in x:
        if not (0 <= b < market.m and 0 <= s < market.n and 0 <= d < market.l):
            raise MarketInputError(f"triple ({b}, {s}, {d}) out of range")
        if not market.can_deliver(d, s):
            raise MarketInputError(f"courier {d} cannot deliver for store {s}")
    return x


def shift_store_costs(market: ThreeSidedMarket, store_costs: Sequence[RatLike]) -> ThreeSidedMarket:
    """Normalize nonzero store costs into values: v'_b(s) = max(v_b(s) − c_s, 0)."""
    costs = [to_rat(c) for c in store_costs]
    if len(costs) != market.n:
        raise MarketInputError(f"expected {market.n} store costs, got {len(costs)}")
    values = [[max(market.value(b, s) - costs[s], Fraction(0)) for s in range(market.n)] for b in range(market.m)]
    return ThreeSidedMarket(values, market.costs, market.cost_structure, market.courier_store)
