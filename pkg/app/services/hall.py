"""Hall violators, deficiency and surplus sets over buyer/seller graphs."""

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Optional

import networkx as nx

from app.core.exception import MarketInputError
from app.markets.types import Edge


@dataclass(frozen=True)
class BipartiteGraph:
    """Buyers, sellers and the (buyer, seller) edges between them."""

    buyers: FrozenSet[int]
    sellers: FrozenSet[int]
    edges: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "buyers", frozenset(self.buyers))
        object.__setattr__(self, "sellers", frozenset(self.sellers))
        edges = frozenset(self.edges)
        for i, j in edges:
            if i not in self.buyers or j not in self.sellers:
                raise MarketInputError(f"edge ({i}, {j}) leaves the graph's vertex sets")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def induced(cls, buyers: Iterable[int], sellers: Iterable[int], edges: Iterable[Edge]) -> "BipartiteGraph":
        """Keep only the edges between ``buyers`` and ``sellers``."""
        buyers, sellers = frozenset(buyers), frozenset(sellers)
        return cls(buyers, sellers, frozenset(e for e in edges if e[0] in buyers and e[1] in sellers))

    def neighbourhood(self, buyers: Iterable[int]) -> FrozenSet[int]:
        buyers = set(buyers)
        return frozenset(j for i, j in self.edges if i in buyers)

    def without(self, buyers: Iterable[int] = (), sellers: Iterable[int] = ()) -> "BipartiteGraph":
        return BipartiteGraph.induced(self.buyers - set(buyers), self.sellers - set(sellers), self.edges)


@dataclass(frozen=True)
class SurplusSet:
    buyers: FrozenSet[int]
    neighborhood: FrozenSet[int]
    k_v: int = 0
    deficiency: int = 0

    @property
    def surplus(self) -> int:
        return len(self.neighborhood) - len(self.buyers)


def maximum_matching(graph: BipartiteGraph) -> Dict[int, int]:
    """Hopcroft-Karp maximum matching as ``{buyer: seller}``."""
    if not graph.edges:
        return {}
    g = nx.Graph()
    top = [("b", i) for i in sorted(graph.buyers)]
    g.add_nodes_from(top, bipartite=0)
    g.add_nodes_from((("s", j) for j in sorted(graph.sellers)), bipartite=1)
    g.add_edges_from((("b", i), ("s", j)) for i, j in sorted(graph.edges))
    matching = nx.bipartite.hopcroft_karp_matching(g, top_nodes=top)
    return {u[1]: v[1] for u, v in matching.items() if u[0] == "b"}


def deficiency(graph: BipartiteGraph) -> int:
    """max over buyer sets X of |X| − |N(X)|, equal to |B| minus the matching number."""
    return len(graph.buyers) - len(maximum_matching(graph))


def max_diff_hall_violator(graph: BipartiteGraph) -> SurplusSet:
    """
    Buyer set of maximum deficiency.

    Buyers reachable by alternating paths from the buyers a maximum matching
    leaves unmatched form the violator; it is empty when the matching is
    buyer-perfect.
    """
    matched = maximum_matching(graph)
    buyer_of = {j: i for i, j in matched.items()}
    adjacency: Dict[int, list] = {}
    for i, j in sorted(graph.edges):
        adjacency.setdefault(i, []).append(j)

    start = sorted(graph.buyers - set(matched))
    reached = set(start)
    queue = deque(start)
    while queue:
        i = queue.popleft()
        for j in adjacency.get(i, []):
            nxt = buyer_of.get(j)
            if nxt is not None and nxt not in reached:
                reached.add(nxt)
                queue.append(nxt)

    violator = frozenset(reached)
    return SurplusSet(violator, graph.neighbourhood(violator), 0, len(graph.buyers) - len(matched))


def vertex_hall_violator(graph: BipartiteGraph, buyer: int) -> Optional[SurplusSet]:
    """
    A Hall violator containing ``buyer``, or None.

    ``buyer`` and its neighbours are removed and the rest must carry deficiency
    at least the number of removed neighbours.
    """
    if buyer not in graph.buyers:
        raise MarketInputError(f"buyer {buyer} is not in the graph")
    own = graph.neighbourhood([buyer])
    if not own:
        return SurplusSet(frozenset([buyer]), frozenset(), 0, 1)
    rest = graph.without(buyers=[buyer], sellers=own)
    best = max_diff_hall_violator(rest)
    if best.deficiency < len(own):
        return None
    members = best.buyers | {buyer}
    hood = graph.neighbourhood(members)
    return SurplusSet(members, hood, 0, max(len(members) - len(hood), 0))


def complement_matching(graph: BipartiteGraph, buyers: Iterable[int], sellers: Iterable[int]) -> Dict[int, int]:
    """Maximum matching between ``buyers`` and ``sellers`` over pairs that are not edges of ``graph``."""
    buyers, sellers = frozenset(buyers), frozenset(sellers)
    pairs = frozenset((i, j) for i in buyers for j in sellers if (i, j) not in graph.edges)
    return maximum_matching(BipartiteGraph(buyers, sellers, pairs))


def surplus_set(graph: BipartiteGraph, buyers: Iterable[int]) -> SurplusSet:
    """Neighbourhood, complement-matching size k_v and clipped deficiency of a buyer set."""
    buyers = frozenset(buyers)
    hood = graph.neighbourhood(buyers)
    k_v = len(complement_matching(graph, buyers, hood))
    return SurplusSet(buyers, hood, k_v, max(len(buyers) - len(hood), 0))
