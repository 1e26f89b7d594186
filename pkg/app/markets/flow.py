"""
Successive-shortest-path min-cost flow over exact rationals.

Bellman-Ford finds each augmenting path, so negative arc costs are allowed as
long as the input network has no negative cycle.
"""

import copy
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, List, Optional, Tuple

from app.core.exception import MarketInputError


@dataclass
class Arc:
    src: int
    dst: int
    cap: int
    cost: Fraction
    flow: int = 0
    rev: int = -1


@dataclass
class FlowResult:
    flow: Dict[Tuple[Hashable, Hashable], int]
    cost: Fraction
    unit_costs: List[Fraction] = field(default_factory=list)


class FlowNetwork:
    """
    Directed network with named nodes, integral capacities and rational costs.

    Typical usage example:
        >>> net = FlowNetwork()
        >>> net.add_edge("s", "t", cap=1, cost=2)
        >>> min_cost_flow(net, "s", "t", 1).cost
        Fraction(2, 1)
    """

    def __init__(self):
        self.names: List[Hashable] = []
        self.index: Dict[Hashable, int] = {}
        self.arcs: List[Arc] = []
        self.adj: List[List[int]] = []

    def add_node(self, name: Hashable) -> int:
        if name not in self.index:
            self.index[name] = len(self.names)
            self.names.append(name)
            self.adj.append([])
        return self.index[name]

    def add_edge(self, src: Hashable, dst: Hashable, cap: int = 1, cost=0) -> int:
        if cap < 0 or int(cap) != cap:
            raise MarketInputError(f"capacity must be a nonnegative integer, got {cap}")
        u, v = self.add_node(src), self.add_node(dst)
        fwd, bwd = len(self.arcs), len(self.arcs) + 1
        self.arcs.append(Arc(u, v, int(cap), Fraction(cost), rev=bwd))
        self.arcs.append(Arc(v, u, 0, -Fraction(cost), rev=fwd))
        self.adj[u].append(fwd)
        self.adj[v].append(bwd)
        return fwd

    def _shortest_path(self, source: int) -> Tuple[List[Optional[Fraction]], List[int]]:
        dist: List[Optional[Fraction]] = [None] * len(self.names)
        parent = [-1] * len(self.names)
        dist[source] = Fraction(0)
        for _ in range(len(self.names)):
            changed = False
            for a_id, arc in enumerate(self.arcs):
                if arc.cap - arc.flow <= 0 or dist[arc.src] is None:
                    continue
                cand = dist[arc.src] + arc.cost
                if dist[arc.dst] is None or cand < dist[arc.dst]:
                    dist[arc.dst] = cand
                    parent[arc.dst] = a_id
                    changed = True
            if not changed:
                break
        return dist, parent


def min_cost_flow(network: FlowNetwork, source: Hashable, sink: Hashable, required: int) -> FlowResult:
    """
    Route ``required`` units from ``source`` to ``sink`` at minimum cost.

    Each augmentation pushes one unit along a cheapest residual path, so
    ``unit_costs`` lists the marginal cost of every unit in nondecreasing order.
    Flow is routed on a copy; ``network`` itself is left untouched.

    Raises:
        MarketInputError: If the network cannot carry ``required`` units.
    """
    if required < 0:
        raise MarketInputError("required flow must be nonnegative")
    network = copy.deepcopy(network)
    s = network.add_node(source)
    t = network.add_node(sink)
    for arc in network.arcs:
        arc.flow = 0

    total = Fraction(0)
    unit_costs: List[Fraction] = []
    for unit in range(required):
        dist, parent = network._shortest_path(s)
        if dist[t] is None:
            raise MarketInputError(f"infeasible flow: only {unit} of {required} units can reach the sink")
        node = t
        while node != s:
            arc = network.arcs[parent[node]]
            arc.flow += 1
            network.arcs[arc.rev].flow -= 1
            node = arc.src
        unit_costs.append(dist[t])
        total += dist[t]

    flow = {}
    for a_id in range(0, len(network.arcs), 2):
        arc = network.arcs[a_id]
        if arc.flow:
            key = (network.names[arc.src], network.names[arc.dst])
            flow[key] = flow.get(key, 0) + arc.flow
    return FlowResult(flow, total, unit_costs)
